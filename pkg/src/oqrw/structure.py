"""Enclosures, recurrent/transient split and decomposition into minimal enclosures.

An enclosure is a block subspace ``V = (+)_i V_i`` with ``L V_j`` inside
``V_i`` for every transition ``L: j -> i``. The recurrent space ``R`` is the
span of the supports of all invariant states and ``D = R^perp`` is the
transient space.

The decomposition of ``R`` uses the fixed points of the dual walk restricted
to ``R``: because the restriction has a faithful invariant state they form a
*-algebra, and spectral projections of a generic Hermitian element are
projections onto minimal enclosures. Minimal enclosures linked by non-zero
off-diagonal invariant operators form families; two members of a family are
related by a partial isometry ``Q`` with ``rho_2 = Q rho_1 Q*``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DiagnosticError, NotInvariantError, StructuralError
from .model import BlockOperator, WalkModel, apply
from .numerics import (CLUSTER_GAP, DEFAULT_RANK_TOL, cluster_values, dagger, null_space,
                       orthonormal_extend, polar_unitary, trace_norm)
from .spectral import build_superoperator, invariant_states, unique_invariant_state
from .subspace import BlockSubspace, lift_operator, restrict

log = logging.getLogger(__name__)

ENCLOSURE_TOL = 1e-9
LINK_TOL = 1e-7


def _unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex).ravel()
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise StructuralError("expected a non-zero vector")
    return x / nrm


def enclosure_of(walk: WalkModel, site, x, tol: float = ENCLOSURE_TOL) -> BlockSubspace:
    """Smallest enclosure containing ``x`` at ``site``.

    Closure by a work list: every new basis vector at ``j`` is pushed through
    each Kraus operator leaving ``j`` and the normalized image is used to
    extend the basis at the target. Images with norm below ``tol`` count as
    zero. Terminates after at most ``total_dim`` extensions.
    """
    site = walk.check_site(site)
    x = _unit(x)
    if x.size != walk.dims[site]:
        raise StructuralError(f"vector of dimension {x.size} at site {site!r}")
    basis = {lab: np.zeros((d, 0), dtype=complex) for lab, d in walk.dims.items()}
    basis[site] = x[:, None]
    work = [(site, x)]
    while work:
        j, v = work.pop()
        for e in walk.outgoing(j):
            for op in e.kraus:
                w = op @ v
                nrm = np.linalg.norm(w)
                if nrm <= tol:
                    continue
                old = basis[e.target]
                new = orthonormal_extend(old, [w / nrm], tol)
                if new.shape[1] > old.shape[1]:
                    basis[e.target] = new
                    work.append((e.target, new[:, -1]))
    return BlockSubspace(walk.dims, basis)


def enclosure_defect(walk: WalkModel, v: BlockSubspace) -> float:
    """Largest norm of the part of ``L b`` outside ``V_i``.

    Taken over Kraus operators ``L: j -> i`` and basis vectors ``b`` of ``V_j``.
    """
    worst = 0.0
    for j, i, op in walk.kraus_items():
        b = v[j]
        if not b.shape[1]:
            continue
        img = op @ b
        out = img - v[i] @ (dagger(v[i]) @ img)
        worst = max(worst, float(np.max(np.linalg.norm(out, axis=0))))
    return worst


def is_enclosure(walk: WalkModel, v: BlockSubspace, tol: float = ENCLOSURE_TOL) -> bool:
    return enclosure_defect(walk, v) <= tol


def accessible(walk: WalkModel, source: tuple, target: tuple, tol: float = 1e-8) -> bool:
    """``phi -> psi``: ``target = (site, y)`` lies in the enclosure generated by ``source``."""
    enc = enclosure_of(walk, *source)
    site = walk.check_site(target[0])
    return enc.residual(site, _unit(target[1])) <= tol


@dataclass
class RecurrentSplit:
    recurrent: BlockSubspace
    transient: BlockSubspace


def recurrent_space(walk: WalkModel, tol: float = DEFAULT_RANK_TOL) -> RecurrentSplit:
    """Union of the supports of all invariant states, and its complement."""
    inv = invariant_states(walk, tol)
    gram = {lab: sum(f[lab] @ dagger(f[lab]) for f in inv.fixed_basis) for lab in walk.labels}
    scale = max(np.linalg.norm(g, 2) for g in gram.values())
    blocks = {}
    for lab, g in gram.items():
        w, v = np.linalg.eigh((g + dagger(g)) / 2)
        blocks[lab] = v[:, w > 1e-8 * scale][:, ::-1]
    rec = BlockSubspace(walk.dims, blocks)
    return RecurrentSplit(rec, rec.complement())


@dataclass
class Family:
    """Mutually orthogonal, pairwise linked minimal enclosures.

    ``isometries[(a, b)]`` maps member ``a`` onto member ``b``, written in the
    subspace coordinates of the members (shape ``dim b x dim a``).
    """

    members: list
    isometries: dict = field(default_factory=dict)


@dataclass
class Decomposition:
    transient: BlockSubspace
    singletons: list
    families: list
    states: list = field(default_factory=list)  # invariant state per enclosure, same order

    def enclosures(self) -> list[BlockSubspace]:
        return list(self.singletons) + [m for f in self.families for m in f.members]

    def family_index(self) -> list[tuple[int, int]]:
        """``(family, member)`` per entry of :meth:`enclosures`; ``(-1, k)`` for singletons."""
        out = [(-1, k) for k in range(len(self.singletons))]
        out += [(b, g) for b, f in enumerate(self.families) for g in range(len(f.members))]
        return out

    @property
    def is_trivial(self) -> bool:
        """Whole space is one minimal enclosure (the walk is irreducible)."""
        return self.transient.dim == 0 and len(self.singletons) == 1 and not self.families

    def summary(self) -> dict:
        return {
            "transient_dim": self.transient.dim,
            "singletons": [s.dim for s in self.singletons],
            "families": [{"member_dims": [m.dim for m in f.members],
                          "isometries": bool(f.isometries)} for f in self.families],
        }


def _dual_fixed_hermitian(walk: WalkModel, tol: float) -> list[BlockOperator]:
    sup = build_superoperator(walk)
    scale = max(np.linalg.norm(sup.dual, 1), 1.0)
    kernel = null_space(sup.dual - np.eye(sup.dim), tol, scale)
    out = []
    for k in range(kernel.shape[1]):
        x = sup.from_vector(kernel[:, k])
        for h in ((x + x.dagger()) * 0.5, (x - x.dagger()) * (-0.5j)):
            if h.norm() > 1e-10:
                out.append(h / h.norm())
    return out


def fixed_space_dim(walk: WalkModel, tol: float = DEFAULT_RANK_TOL) -> int:
    return invariant_states(walk, tol).dim


def _split(walk: WalkModel, rng: np.random.Generator, tol: float, depth: int,
           max_depth: int) -> list[BlockSubspace]:
    """Minimal enclosures of a walk that has a faithful invariant state."""
    if fixed_space_dim(walk, tol) == 1:
        return [BlockSubspace.full(walk)]
    herm = _dual_fixed_hermitian(walk, tol)
    for attempt in range(8):
        coeff = rng.standard_normal(len(herm))
        x = sum((c * h for c, h in zip(coeff, herm)), BlockOperator.zeros(walk))
        eig = {lab: np.linalg.eigh((b + dagger(b)) / 2) for lab, b in x.items()}
        values = np.concatenate([w for w, _ in eig.values()])
        scale = max(np.abs(values).max(), 1.0)
        groups = cluster_values(values, CLUSTER_GAP * scale)
        if len(groups) > 1:
            break
        log.debug("degenerate random fixed point (attempt %d), redrawing", attempt)
    else:
        raise DiagnosticError(f"could not split a fixed space of dimension > 1 in {walk.name!r}")
    owner = np.concatenate([[lab] * len(w) for lab, (w, _) in eig.items()])
    column = np.concatenate([np.arange(len(w)) for w, _ in eig.values()])
    pieces = []
    for g in groups:
        blocks = {lab: eig[lab][1][:, [column[k] for k in g if owner[k] == lab]]
                  for lab in walk.labels}
        pieces.append(BlockSubspace(walk.dims, blocks))
    out = []
    for piece in pieces:
        if not is_enclosure(walk, piece, 1e-6):
            raise DiagnosticError("spectral projection of a dual fixed point is not an enclosure")
        sub = restrict(walk, piece)
        if depth >= max_depth:
            raise DiagnosticError("minimal enclosure search exceeded its recursion limit")
        for leaf in _split(sub, rng, tol, depth + 1, max_depth):
            out.append(_compose(walk, piece, leaf))
    return out


def _compose(walk: WalkModel, outer: BlockSubspace, inner: BlockSubspace) -> BlockSubspace:
    """Express a subspace given in ``outer``'s restricted coordinates in ``walk``'s coordinates."""
    blocks = {}
    for lab in walk.labels:
        if lab in inner.dims:
            blocks[lab] = outer[lab] @ inner[lab]
    return BlockSubspace(walk.dims, blocks)


def enclosure_state(walk: WalkModel, enc: BlockSubspace, tol: float = DEFAULT_RANK_TOL
                    ) -> BlockOperator:
    """Unique invariant state of the walk restricted to a minimal enclosure, in full coordinates."""
    sub = restrict(walk, enc)
    return lift_operator(walk, enc, unique_invariant_state(sub, tol))


def _off_diagonal_fixed(walk: WalkModel, e1: BlockSubspace, e2: BlockSubspace,
                        fixed: list[BlockOperator]) -> np.ndarray | None:
    best, best_norm = None, 0.0
    for f in fixed:
        w = e1.compress(f, e2)
        nrm = np.linalg.norm(w)
        if nrm > best_norm:
            best, best_norm = w, nrm
    return best if best_norm > LINK_TOL else None


def _fix_phase(q: np.ndarray) -> np.ndarray:
    flat = q.ravel()
    k = int(np.argmax(np.abs(flat) > np.abs(flat).max() - 1e-9))
    return q * (abs(flat[k]) / flat[k])


def link_isometry(walk: WalkModel, e1: BlockSubspace, e2: BlockSubspace,
                  fixed: list[BlockOperator] | None = None, tol: float = 1e-8) -> np.ndarray | None:
    """Partial isometry from ``e1`` onto ``e2`` carried by an off-diagonal invariant operator.

    Returns ``Q`` in subspace coordinates (``dim e2 x dim e1``), or ``None``
    when the two minimal enclosures support no off-diagonal fixed point. The
    global phase is fixed by making the largest entry (first in row-major
    order) real positive.
    """
    if fixed is None:
        fixed = invariant_states(walk).fixed_basis
    eta = _off_diagonal_fixed(walk, e1, e2, fixed)
    if eta is None:
        return None
    if e1.dim != e2.dim:
        raise DiagnosticError("linked minimal enclosures must have equal dimension")
    q = _fix_phase(dagger(polar_unitary(eta)))
    rho1 = e1.compress(enclosure_state(walk, e1))
    rho2 = e2.compress(enclosure_state(walk, e2))
    err = max(np.linalg.norm(dagger(q) @ q - np.eye(e1.dim), 2),
              np.linalg.norm(q @ dagger(q) - np.eye(e2.dim), 2),
              np.linalg.norm(q @ rho1 @ dagger(q) - rho2, 2))
    if err > tol:
        raise DiagnosticError(
            f"polar factor is not a state-transporting isometry (error {err:.2e})")
    return q


def decompose(walk: WalkModel, enclosures: list[BlockSubspace], tol: float = DEFAULT_RANK_TOL
              ) -> Decomposition:
    """Group mutually orthogonal minimal enclosures of ``R`` into singletons and families."""
    for a in range(len(enclosures)):
        for b in range(a + 1, len(enclosures)):
            if enclosures[a].overlap(enclosures[b]) > 1e-8:
                raise StructuralError(f"enclosures {a} and {b} are not orthogonal")
    fixed = invariant_states(walk, tol).fixed_basis
    n = len(enclosures)
    parent = list(range(n))

    def find(k):
        while parent[k] != k:
            k = parent[k]
        return k

    for a in range(n):
        for b in range(a + 1, n):
            if _off_diagonal_fixed(walk, enclosures[a], enclosures[b], fixed) is not None:
                parent[find(b)] = find(a)
    groups: dict[int, list[int]] = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    singletons, families = [], []
    for members in sorted(groups.values()):
        if len(members) == 1:
            singletons.append(enclosures[members[0]])
            continue
        fam = Family([enclosures[k] for k in members])
        for a in range(len(members)):
            for b in range(len(members)):
                if a != b:
                    fam.isometries[(a, b)] = link_isometry(walk, fam.members[a], fam.members[b],
                                                           fixed)
        families.append(fam)
    covered = {lab: np.concatenate([e[lab] for e in enclosures], axis=1) if enclosures
               else np.zeros((d, 0)) for lab, d in walk.dims.items()}
    transient = BlockSubspace(walk.dims, covered).complement()
    dec = Decomposition(transient, singletons, families)
    dec.states = [enclosure_state(walk, e, tol) for e in dec.enclosures()]
    return dec


def minimal_enclosures(walk: WalkModel, seed: int = 0, tol: float = DEFAULT_RANK_TOL,
                       max_depth: int = 16) -> Decomposition:
    """Orthogonal decomposition of the space into ``D`` and minimal enclosures.

    Deterministic for a given ``seed``. Every fixed point of the walk is
    checked to be explained by the result (diagonal blocks proportional to
    the enclosure states, off-diagonal blocks only inside families).
    """
    split = recurrent_space(walk, tol)
    rec = split.recurrent
    rng = np.random.default_rng(seed)
    sub = restrict(walk, rec)
    leaves = [_compose(walk, rec, leaf) for leaf in _split(sub, rng, tol, 0, max_depth)]
    for leaf in leaves:
        if not is_enclosure(walk, leaf, 1e-7):
            raise DiagnosticError("computed minimal enclosure is not stable under the walk")
    dec = decompose(walk, leaves, tol)
    for f in invariant_states(walk, tol).fixed_basis:
        herm = max(((f + f.dagger()) * 0.5, (f - f.dagger()) * (-0.5j)), key=lambda h: h.norm())
        rep = explain(walk, dec, herm)
        if rep.residual > 1e-7 * max(herm.norm(), 1.0):
            raise DiagnosticError(
                f"fixed point not explained by the decomposition (residual {rep.residual:.2e})")
    return dec


@dataclass
class StructureReport:
    """Coordinates of an invariant operator in a decomposition.

    ``coefficients[k]`` multiplies the invariant state of enclosure ``k``
    (order of :meth:`Decomposition.enclosures`); ``off_diagonal[(a, b)]``
    multiplies ``rho_a Q_ab*`` for linked enclosures ``a < b``.
    """

    coefficients: list
    off_diagonal: dict
    residual: float


def explain(walk: WalkModel, dec: Decomposition, x: BlockOperator) -> StructureReport:
    dense = x.to_dense(walk)
    encs = dec.enclosures()
    if len(dec.states) != len(encs):
        dec.states = [enclosure_state(walk, e) for e in encs]
    recon = np.zeros_like(dense)
    coeffs = []
    for enc, state in zip(encs, dec.states):
        s = enc.compress(state)
        t = complex(np.trace(enc.compress(x)))
        coeffs.append(t.real if abs(t.imag) < 1e-12 else t)
        recon += t * enc.embed(s)
    off = {}
    where = dec.family_index()
    for a in range(len(encs)):
        for b in range(a + 1, len(encs)):
            fa, ga = where[a]
            fb, gb = where[b]
            if fa < 0 or fa != fb:
                continue
            q = dec.families[fa].isometries[(ga, gb)]
            eta = encs[a].compress(dec.states[a]) @ dagger(q)
            block = dagger(encs[a].isometry()) @ dense @ encs[b].isometry()
            s = complex(np.vdot(eta, block) / np.vdot(eta, eta))
            off[(a, b)] = s
            recon += s * encs[a].embed(eta, encs[b])
            recon += np.conj(s) * encs[b].embed(dagger(eta), encs[a])
    return StructureReport(coeffs, off, trace_norm(dense - recon))


def invariant_state_structure(walk: WalkModel, dec: Decomposition, rho: BlockOperator,
                              tol: float = 1e-9) -> StructureReport:
    """Decompose an invariant state: weights per enclosure and coherences inside families.

    ``residual`` is the trace norm of the part of ``rho`` not of that form;
    it is below 1e-8 for any invariant state.
    """
    defect = (apply(walk, rho) - rho).trace_norm()
    if defect > tol:
        raise NotInvariantError(f"state is not invariant (|M(rho) - rho|_1 = {defect:.2e})")
    return explain(walk, dec, rho)


def assemble_state(walk: WalkModel, dec: Decomposition, coefficients, off_diagonal
                   ) -> BlockOperator:
    """Operator ``sum t_k rho_k + sum (s rho_a Q* + conj(s) Q rho_a)`` from decomposition data."""
    encs = dec.enclosures()
    if len(dec.states) != len(encs):
        dec.states = [enclosure_state(walk, e) for e in encs]
    dense = np.zeros((walk.total_dim, walk.total_dim), dtype=complex)
    for t, enc, state in zip(coefficients, encs, dec.states):
        dense += t * enc.embed(enc.compress(state))
    where = dec.family_index()
    for (a, b), s in off_diagonal.items():
        fa, ga = where[a]
        _, gb = where[b]
        q = dec.families[fa].isometries[(ga, gb)]
        eta = encs[a].compress(dec.states[a]) @ dagger(q)
        dense += s * encs[a].embed(eta, encs[b]) + np.conj(s) * encs[b].embed(dagger(eta), encs[a])
    return BlockOperator.from_dense(walk, dense)
