"""Superoperator matrix of a walk and everything read off its spectrum.

The walk acts on block-diagonal operators only, so the superoperator is the
``D x D`` matrix with ``D = sum_i dim(h_i)**2`` on the column-stacked blocks
``vec(rho(i))`` laid out in site order. The block ``(i, j)`` of the matrix is
``sum_L conj(L) kron L`` over the Kraus operators of the edge ``j -> i``.
The dual (Heisenberg) map is represented by the conjugate transpose.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import gcd

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DiagnosticError, NumericalError, ReducibleWalkError, StructuralError
from .model import BlockOperator, WalkModel, apply, apply_dual
from .numerics import (DEFAULT_RANK_TOL, dagger, eig_general, null_space,
                       orthonormal_extend, polar_unitary, psd_part, unvec, vec)
from .subspace import BlockSubspace

log = logging.getLogger(__name__)

PERIPHERAL_TOL = 1e-8
ROOT_MATCH_TOL = 1e-7


@dataclass(frozen=True)
class Superoperator:
    matrix: np.ndarray
    layout: tuple  # ((label, offset, dim), ...), offset into the vectorized space
    dims: dict

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dual(self) -> np.ndarray:
        return dagger(self.matrix)

    def to_vector(self, x: BlockOperator) -> np.ndarray:
        return np.concatenate([vec(x[lab]) for lab, _, _ in self.layout])

    def from_vector(self, v: np.ndarray) -> BlockOperator:
        return BlockOperator(self.dims, {lab: unvec(v[off:off + d * d], d)
                                         for lab, off, d in self.layout})

    def __call__(self, x: BlockOperator) -> BlockOperator:
        return self.from_vector(self.matrix @ self.to_vector(x))


def build_superoperator(walk: WalkModel) -> Superoperator:
    layout, off = [], 0
    for lab in walk.labels:
        d = walk.dims[lab]
        layout.append((lab, off, d))
        off += d * d
    where = {lab: (o, d) for lab, o, d in layout}
    s = np.zeros((off, off), dtype=complex)
    for j, i, op in walk.kraus_items():
        (oi, di), (oj, dj) = where[i], where[j]
        s[oi:oi + di * di, oj:oj + dj * dj] += np.kron(op.conj(), op)
    return Superoperator(s, tuple(layout), dict(walk.dims))


@dataclass
class InvariantStates:
    """Fixed space of the walk: an orthonormal basis and a spanning family of states."""

    fixed_basis: list
    states: list

    @property
    def dim(self) -> int:
        return len(self.fixed_basis)


def _hermitian_parts(x: BlockOperator) -> list[BlockOperator]:
    h1 = (x + x.dagger()) * 0.5
    h2 = (x - x.dagger()) * (-0.5j)
    return [h for h in (h1, h2) if h.norm() > 1e-12]


def _signed_parts(h: BlockOperator) -> list[BlockOperator]:
    out = []
    for sign in (1, -1):
        part = BlockOperator(h.dims, {lab: psd_part(b, sign) for lab, b in h.items()})
        tr = part.trace().real
        if tr > 1e-9 * max(h.norm(), 1e-300):
            out.append(part / tr)
    return out


def _rank(x: BlockOperator, tol: float = 1e-9) -> int:
    total = 0
    for b in x.blocks.values():
        if b.size:
            w = np.linalg.eigvalsh((b + dagger(b)) / 2)
            total += int(np.sum(w > tol * max(w.max(), 1e-300)))
    return total


def invariant_states(walk: WalkModel, tol: float = DEFAULT_RANK_TOL) -> InvariantStates:
    """Basis of ``Ker(S - Id)`` and a linearly independent spanning family of invariant states.

    States are obtained as normalized positive and negative parts of the
    Hermitian fixed points; lower-rank candidates are preferred, which
    yields the extremal states whenever the fixed space is spanned by
    states with disjoint supports.
    """
    sup = build_superoperator(walk)
    scale = max(np.linalg.norm(sup.matrix, 1), 1.0)
    kernel = null_space(sup.matrix - np.eye(sup.dim), tol, scale)
    if kernel.shape[1] == 0:
        raise NumericalError("no fixed point found; a finite walk always has an invariant state")
    basis = [sup.from_vector(kernel[:, k]) for k in range(kernel.shape[1])]
    candidates = []
    for f in basis:
        for h in _hermitian_parts(f):
            candidates.extend(_signed_parts(h))
    candidates.sort(key=_rank)
    chosen, vecs = [], np.zeros((sup.dim, 0), dtype=complex)
    for c in candidates:
        v = sup.to_vector(c)
        grown = orthonormal_extend(vecs, [v / np.linalg.norm(v)], 1e-6)
        if grown.shape[1] > vecs.shape[1]:
            chosen.append(c)
            vecs = grown
        if len(chosen) == len(basis):
            break
    if len(chosen) != len(basis):
        raise NumericalError(
            f"invariant states span {len(chosen)} dimensions, fixed space has {len(basis)}")
    return InvariantStates(basis, chosen)


def is_faithful(state: BlockOperator, tol: float = DEFAULT_RANK_TOL) -> bool:
    scale = max(abs(np.linalg.eigvalsh(b)).max() for b in state.blocks.values())
    return bool(state.min_eigenvalue() > tol * scale)


def is_irreducible(walk: WalkModel, tol: float = DEFAULT_RANK_TOL) -> bool:
    """Unique invariant state that is faithful."""
    inv = invariant_states(walk, tol)
    return bool(inv.dim == 1 and is_faithful(inv.states[0], tol))


def unique_invariant_state(walk: WalkModel, tol: float = DEFAULT_RANK_TOL) -> BlockOperator:
    inv = invariant_states(walk, tol)
    if inv.dim != 1:
        raise ReducibleWalkError(f"fixed space of {walk.name!r} has dimension {inv.dim}")
    return inv.states[0]


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    peripheral: np.ndarray
    period: int | None
    simple_one: bool
    root_error: float = field(default=float("nan"))


def spectrum(walk: WalkModel) -> np.ndarray:
    return eig_general(build_superoperator(walk).matrix).values


def peripheral_spectrum(walk: WalkModel, tol: float = PERIPHERAL_TOL) -> SpectrumReport:
    """Eigenvalues on the unit circle; ``period`` is left unset (works for reducible walks)."""
    ev = spectrum(walk)
    per = ev[np.abs(np.abs(ev) - 1) <= tol]
    per = per[np.argsort(np.mod(np.angle(per), 2 * np.pi))]
    n_one = int(np.sum(np.abs(ev - 1) <= ROOT_MATCH_TOL))
    return SpectrumReport(ev, per, None, n_one == 1)


def root_of_unity_error(values: np.ndarray) -> float:
    """Distance between a set of ``d`` values and the ``d``-th roots of unity (best matching)."""
    d = len(values)
    if d == 0:
        return float("inf")
    roots = np.exp(2j * np.pi * np.arange(d) / d)
    cost = np.abs(values[:, None] - roots[None, :])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def period(walk: WalkModel, tol: float = PERIPHERAL_TOL, irreducible_tol: float = DEFAULT_RANK_TOL
           ) -> SpectrumReport:
    """Period of an irreducible walk, read off as the number of peripheral eigenvalues.

    Raises :class:`ReducibleWalkError` for reducible walks and
    :class:`DiagnosticError` when the peripheral set is not the group of
    ``d``-th roots of unity within :data:`ROOT_MATCH_TOL`.
    """
    if not is_irreducible(walk, irreducible_tol):
        raise ReducibleWalkError(f"walk {walk.name!r} is reducible; its period is undefined")
    rep = peripheral_spectrum(walk, tol)
    d = len(rep.peripheral)
    rep.root_error = root_of_unity_error(rep.peripheral)
    if rep.root_error > ROOT_MATCH_TOL:
        raise DiagnosticError(
            f"peripheral eigenvalues {np.round(rep.peripheral, 10)} are not the {d}-th roots "
            f"of unity (error {rep.root_error:.2e})")
    rep.period = d
    return rep


@dataclass
class CyclicResolution:
    """Resolution of the identity ``P_0, ..., P_{d-1}`` with ``M*(P_k) = P_{k-1}``."""

    subspaces: list
    projections: list
    eigen_operator: BlockOperator | None
    cyclic_error: float
    block_error: float

    @property
    def d(self) -> int:
        return len(self.projections)


def block_relation_error(walk: WalkModel, projections: list[BlockOperator]) -> float:
    """Max over Kraus operators ``L: j -> i`` and ``k`` of ``|P_k(i) L - L P_{k-1}(j)|``."""
    d = len(projections)
    err = 0.0
    for j, i, op in walk.kraus_items():
        for k in range(d):
            diff = projections[k][i] @ op - op @ projections[(k - 1) % d][j]
            err = max(err, float(np.linalg.norm(diff, 2)))
    return err


def cyclic_relation_error(walk: WalkModel, projections: list[BlockOperator]) -> float:
    d = len(projections)
    return max((apply_dual(walk, projections[k]) - projections[(k - 1) % d]).norm()
               for k in range(d))


def cyclic_resolution(walk: WalkModel, d: int | None = None, tol: float = 1e-8
                      ) -> CyclicResolution:
    """Cyclic projections of an irreducible ``d``-periodic walk.

    The dual eigen-operator ``U`` at ``exp(2 pi i/d)`` is made unitary by a
    polar correction, its global phase is fixed so that its first non-zero
    diagonal entry is positive, and its spectral projections are grouped by
    root of unity. Labels are rotated so that ``P_0`` carries the largest
    weight of ``e_1`` at the first site. The decomposition is not canonical
    when the ``d``-th power of the walk has a non-unique decomposition.
    """
    if d is None:
        d = period(walk).period
    if d == 1:
        ident = BlockOperator.identity(walk)
        return CyclicResolution([BlockSubspace.full(walk)], [ident], None, 0.0, 0.0)
    if d < 1:
        raise StructuralError(f"period must be positive, got {d}")
    sup = build_superoperator(walk)
    omega = np.exp(2j * np.pi / d)
    scale = max(np.linalg.norm(sup.dual, 1), 1.0)
    kernel = null_space(sup.dual - omega * np.eye(sup.dim), 1e-7, scale)
    if kernel.shape[1] == 0:
        raise DiagnosticError(f"exp(2 pi i/{d}) is not an eigenvalue of the dual map")
    if kernel.shape[1] > 1:
        log.warning("dual eigenspace at exp(2 pi i/%d) has dimension %d", d, kernel.shape[1])
    u = sup.from_vector(kernel[:, 0])
    blocks = {}
    for lab, b in u.items():
        sv = np.linalg.svd(b, compute_uv=False)
        if sv[-1] < 1e-6 * sv[0]:
            raise NumericalError(f"dual eigen-operator is singular at site {lab!r}")
        blocks[lab] = polar_unitary(b)
    first = next(x for lab in walk.labels for x in np.diag(blocks[lab]) if abs(x) > 1e-8)
    phase = abs(first) / first
    u = BlockOperator(walk.dims, {lab: phase * b for lab, b in blocks.items()})

    schur = {lab: scipy.linalg.schur(b, output="complex") for lab, b in u.items()}
    mus = np.concatenate([np.diag(t) for t, _ in schur.values()])
    c = np.mean(mus ** d)
    c = (c / abs(c)) ** (1.0 / d)
    label_of = {}
    for lab, (t, z) in schur.items():
        ratio = np.diag(t) / c
        ks = np.mod(np.rint(np.angle(ratio) * d / (2 * np.pi)).astype(int), d)
        if np.max(np.abs(ratio - omega ** ks), initial=0) > 1e-6:
            raise DiagnosticError("eigenvalues of the cyclic eigen-operator are not roots of unity")
        label_of[lab] = ks
    lab0 = walk.labels[0]
    _, z0 = schur[lab0]
    weights = np.zeros(d)
    np.add.at(weights, label_of[lab0], np.abs(z0[0, :]) ** 2)
    shift = int(np.argmax(weights))

    subspaces = []
    for k in range(d):
        sub = {}
        for lab, (_, z) in schur.items():
            sub[lab] = z[:, np.mod(label_of[lab] - shift, d) == k]
        subspaces.append(BlockSubspace(walk.dims, sub))
    projections = [s.projector() for s in subspaces]
    cyc = cyclic_relation_error(walk, projections)
    blk = block_relation_error(walk, projections)
    if cyc > tol or blk > tol:
        raise DiagnosticError(
            f"cyclic projections fail their relations (dual {cyc:.2e}, block {blk:.2e})")
    return CyclicResolution(subspaces, projections, u, cyc, blk)


def evolve(walk: WalkModel, rho: BlockOperator, n: int) -> list[BlockOperator]:
    """``[rho, M(rho), ..., M^n(rho)]``."""
    out = [rho]
    for _ in range(n):
        out.append(apply(walk, out[-1]))
    return out


def site_probabilities(states: list[BlockOperator]) -> np.ndarray:
    """``P(Q_k = i) = Tr M^k(rho)(i)``, shape ``(len(states), n_sites)``."""
    return np.array([[float(np.trace(b).real) for b in s.blocks.values()] for s in states])


def cesaro_evolve(walk: WalkModel, rho: BlockOperator, n: int) -> BlockOperator:
    """``(1/n) sum_{k<n} M^k(rho)``."""
    if n < 1:
        raise StructuralError("Cesaro average needs n >= 1")
    acc, cur = rho * 1.0, rho
    for _ in range(n - 1):
        cur = apply(walk, cur)
        acc = acc + cur
    return acc / n


def cesaro_series(states: list[BlockOperator]) -> list[BlockOperator]:
    """Running Cesaro averages; entry ``k`` averages ``states[0..k]``."""
    out, acc = [], None
    for k, s in enumerate(states):
        acc = s * 1.0 if acc is None else acc + s
        out.append(acc / (k + 1))
    return out


def default_loop_length(walk: WalkModel) -> int:
    return 2 * len(walk.labels) * max(walk.dims.values())


def loop_gcd(walk: WalkModel, site, x, max_len: int | None = None, tol: float = 1e-10,
             max_frontier: int = 1 << 22) -> int:
    """GCD of the lengths ``l <= max_len`` of loops ``pi`` at ``site`` with ``|<x, L_pi x>| > tol``.

    Every Kraus operator counts as a separate edge. Returns 0 when no loop
    qualifies. Enumeration stops early once the GCD reaches 1, and stops
    (with a log warning) if the number of distinct path images exceeds
    ``max_frontier``.
    """
    site = walk.check_site(site)
    x = np.asarray(x, dtype=complex).ravel()
    if x.size != walk.dims[site] or not np.any(x):
        raise StructuralError(f"need a non-zero vector of dimension {walk.dims[site]}")
    x = x / np.linalg.norm(x)
    max_len = default_loop_length(walk) if max_len is None else max_len
    frontier = {site: x[None, :]}
    g = 0
    for length in range(1, max_len + 1):
        nxt: dict[str, list] = {}
        for j, i, op in walk.kraus_items():
            if j in frontier:
                nxt.setdefault(i, []).append(frontier[j] @ op.T)
        frontier = {}
        size = 0
        for i, parts in nxt.items():
            arr = np.concatenate(parts)
            key = np.round(np.concatenate([arr.real, arr.imag], axis=1), 13)
            _, idx = np.unique(key, axis=0, return_index=True)
            arr = arr[np.sort(idx)]
            arr = arr[np.linalg.norm(arr, axis=1) > tol]
            if len(arr):
                frontier[i] = arr
                size += len(arr)
        if site in frontier and np.any(np.abs(frontier[site] @ x.conj()) > tol):
            g = gcd(g, length)
            if g == 1:
                return 1
        if size > max_frontier:
            log.warning("loop enumeration stopped at length %d (%d path images)", length, size)
            break
        if not frontier:
            break
    return g
