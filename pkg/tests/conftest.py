import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oqrw.model import SiteSpace, TransitionEdge, WalkModel
from oqrw.numerics import dagger

settings.register_profile("oqrw", max_examples=100, derandomize=True, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("oqrw")


def _normalize(ops):
    """Rescale a family so that sum L*L = Id.

    Right multiplication by the inverse of the upper-triangular Cholesky
    factor of ``S = sum L*L``; it keeps span{e_1} invariant and diagonal
    operators diagonal.
    """
    s = sum(dagger(op) @ op for op in ops)
    upper = dagger(np.linalg.cholesky(s))
    inv = np.linalg.inv(upper)
    return [op @ inv for op in ops]


def _cplx(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_walk(rng, n_sites=None, max_dim=3, kind=None):
    """Random validated walk with 2..4 sites and dims <= max_dim.

    ``kind`` picks a family: dense generic walks (almost surely irreducible),
    sparse graphs (often reducible through absorbing sites), diagonal Kraus
    operators (always reducible when dims > 1) and walks with a common
    invariant subspace at every site.
    """
    n = int(rng.integers(2, 5)) if n_sites is None else n_sites
    kind = kind or rng.choice(["generic", "sparse", "diagonal", "invariant"])
    if kind in ("diagonal", "invariant"):
        d = int(rng.integers(2, max_dim + 1))
        dims = [d] * n
    else:
        dims = [int(x) for x in rng.integers(1, max_dim + 1, size=n)]
    labels = [str(k) for k in range(n)]
    edges = []
    for j in range(n):
        if kind == "sparse":
            targets = sorted(set(rng.choice(n, size=int(rng.integers(1, 3))).tolist()))
            if sum(dims[i] for i in targets) < dims[j]:
                targets = sorted(set(targets) | {j})
        else:
            targets = list(range(n))
        ops = []
        for i in targets:
            if kind == "diagonal":
                op = np.diag(_cplx(rng, dims[j]))
            elif kind == "invariant":
                op = _cplx(rng, (dims[i], dims[j]))
                op[1:, :1] = 0  # keeps span{e_1} at every site invariant
            else:
                op = _cplx(rng, (dims[i], dims[j]))
            ops.append(op)
        ops = _normalize(ops)
        edges += [TransitionEdge(labels[j], labels[i], (op,)) for i, op in zip(targets, ops)]
    sites = [SiteSpace(lab, d) for lab, d in zip(labels, dims)]
    return WalkModel(sites, edges, f"random-{kind}")


def random_state(rng, walk):
    blocks = {}
    for lab, d in walk.dims.items():
        a = _cplx(rng, (d, d))
        blocks[lab] = a @ dagger(a)
    total = sum(np.trace(b).real for b in blocks.values())
    from oqrw.model import BlockOperator
    return BlockOperator(walk.dims, {lab: b / total for lab, b in blocks.items()})


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)``; lines are printed in the terminal summary."""

    def record(number, passed, detail=""):
        _ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
