"""Exception hierarchy shared by every module."""


class OQRWError(Exception):
    """Base class for all errors raised by :mod:`oqrw`."""


class StructuralError(OQRWError, ValueError):
    """Shapes, labels or dimensions of a walk or state do not fit together."""


class StochasticityError(OQRWError, ValueError):
    """A family of transition operators fails ``sum L*L = Id``."""


class NumericalError(OQRWError, ArithmeticError):
    """A linear-algebra kernel could not meet its accuracy contract."""


class ReducibleWalkError(OQRWError, ValueError):
    """An operation that needs an irreducible walk received a reducible one."""


class DiagnosticError(OQRWError):
    """A consistency check on computed spectral or structural data failed.

    Raised instead of silently rounding, e.g. when the peripheral eigenvalues
    are not a group of roots of unity.
    """


class ConfigError(OQRWError, ValueError):
    """A walk configuration document could not be parsed."""


class NotInvariantError(OQRWError, ValueError):
    """A state passed as invariant is not a fixed point of the walk."""
