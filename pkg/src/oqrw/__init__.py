"""Open quantum random walks on finite graphs: spectra, periods, enclosures and trajectories."""
from .config import parse_config, serialize
from .errors import (ConfigError, DiagnosticError, NotInvariantError, NumericalError, OQRWError,
                     ReducibleWalkError, StochasticityError, StructuralError)
from .model import (BlockOperator, BlockState, SiteSpace, TransitionEdge, WalkModel, apply,
                    apply_dual, lift_homogeneous, minimal_dilation, path_operator, validate)
from .registry import builtin
from .report import analyze, emit_series
from .spectral import (build_superoperator, cyclic_resolution, evolve, invariant_states,
                       is_irreducible, loop_gcd, period, unique_invariant_state)
from .structure import (enclosure_of, invariant_state_structure, is_enclosure, link_isometry,
                        minimal_enclosures, recurrent_space)
from .subspace import BlockSubspace
from .trajectory import km_residual, law_comparison, occupation_stats, sample_trajectory

__version__ = "0.1.0"

__all__ = [
    "BlockOperator", "BlockState", "BlockSubspace", "ConfigError", "DiagnosticError",
    "NotInvariantError", "NumericalError", "OQRWError", "ReducibleWalkError", "SiteSpace",
    "StochasticityError", "StructuralError", "TransitionEdge", "WalkModel", "analyze", "apply",
    "apply_dual", "build_superoperator", "builtin", "cyclic_resolution", "emit_series",
    "enclosure_of", "evolve", "invariant_state_structure", "invariant_states", "is_enclosure",
    "is_irreducible", "km_residual", "law_comparison", "lift_homogeneous", "link_isometry",
    "loop_gcd", "minimal_dilation", "minimal_enclosures", "occupation_stats", "parse_config",
    "path_operator", "period", "recurrent_space", "sample_trajectory", "serialize",
    "unique_invariant_state", "validate",
]
