"""Block subspaces ``V = (+)_i V_i`` with ``V_i`` a subspace of the site space ``h_i``."""
from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .errors import StructuralError
from .model import BlockOperator, SiteSpace, TransitionEdge, WalkModel
from .numerics import DEFAULT_RANK_TOL, dagger, orthonormal_extend


class BlockSubspace:
    """Per-site orthonormal bases, stored as ``(dim h_i, dim V_i)`` column arrays.

    Coordinates on the subspace follow the site order of ``dims`` and, within
    a site, the column order of its basis.
    """

    __slots__ = ("dims", "blocks")

    def __init__(self, dims: Mapping[str, int], blocks: Mapping[str, np.ndarray] | None = None,
                 check: bool = True):
        self.dims = dict(dims)
        blocks = dict(blocks or {})
        unknown = set(blocks) - set(self.dims)
        if unknown:
            raise StructuralError(f"subspace blocks for unknown sites {sorted(unknown)}")
        self.blocks = {}
        for lab, d in self.dims.items():
            b = np.asarray(blocks.get(lab, np.zeros((d, 0))), dtype=complex)
            if b.ndim != 2 or b.shape[0] != d:
                raise StructuralError(f"basis at site {lab!r} must have {d} rows, got {b.shape}")
            if check and b.shape[1] and not np.allclose(dagger(b) @ b, np.eye(b.shape[1]),
                                                        atol=1e-10):
                raise StructuralError(f"basis at site {lab!r} is not orthonormal")
            self.blocks[lab] = b

    @classmethod
    def full(cls, walk: WalkModel) -> "BlockSubspace":
        return cls(walk.dims, {lab: np.eye(d, dtype=complex) for lab, d in walk.dims.items()})

    @classmethod
    def zero(cls, walk: WalkModel) -> "BlockSubspace":
        return cls(walk.dims)

    @classmethod
    def span(cls, walk: WalkModel, vectors: Mapping[str, Iterable],
             tol: float = DEFAULT_RANK_TOL) -> "BlockSubspace":
        """Orthonormalized span of ``{site: [vectors]}`` (vectors are normalized first)."""
        blocks = {}
        for lab, vs in vectors.items():
            lab = walk.check_site(lab)
            vs = [np.asarray(v, dtype=complex).ravel() for v in vs]
            vs = [v / np.linalg.norm(v) for v in vs if np.linalg.norm(v) > 0]
            blocks[lab] = orthonormal_extend(np.zeros((walk.dims[lab], 0)), vs, tol) if vs \
                else np.zeros((walk.dims[lab], 0))
        return cls(walk.dims, blocks)

    @classmethod
    def from_projector(cls, walk: WalkModel, p: BlockOperator) -> "BlockSubspace":
        """Range of a block-diagonal (near-)projection: eigenvectors with eigenvalue > 1/2."""
        blocks = {}
        for lab in walk.labels:
            w, v = np.linalg.eigh((p[lab] + dagger(p[lab])) / 2)
            blocks[lab] = v[:, w > 0.5]
        return cls(walk.dims, blocks)

    @property
    def dim(self) -> int:
        return sum(b.shape[1] for b in self.blocks.values())

    def site_dims(self) -> dict[str, int]:
        return {lab: b.shape[1] for lab, b in self.blocks.items()}

    def __getitem__(self, label) -> np.ndarray:
        return self.blocks[str(label)]

    def projector(self) -> BlockOperator:
        return BlockOperator(self.dims, {lab: b @ dagger(b) for lab, b in self.blocks.items()})

    def isometry(self) -> np.ndarray:
        """Dense ``(sum dim h_i) x dim V`` isometry from subspace coordinates."""
        n = sum(self.dims.values())
        out = np.zeros((n, self.dim), dtype=complex)
        row = col = 0
        for lab, d in self.dims.items():
            b = self.blocks[lab]
            out[row:row + d, col:col + b.shape[1]] = b
            row += d
            col += b.shape[1]
        return out

    def residual(self, site: str, x) -> float:
        """Norm of the component of ``x`` (at ``site``) orthogonal to ``V_site``."""
        b = self.blocks[site]
        x = np.asarray(x, dtype=complex).ravel()
        return float(np.linalg.norm(x - b @ (dagger(b) @ x)))

    def complement(self) -> "BlockSubspace":
        blocks = {}
        for lab, d in self.dims.items():
            b = self.blocks[lab]
            full = orthonormal_extend(b, list(np.eye(d, dtype=complex)), 1e-8)
            blocks[lab] = full[:, b.shape[1]:]
        return BlockSubspace(self.dims, blocks)

    def compress(self, x: BlockOperator, other: "BlockSubspace | None" = None) -> np.ndarray:
        """Matrix of ``P_self X P_other`` in subspace coordinates (block-diagonal ``X``)."""
        other = self if other is None else other
        return dagger(self.isometry()) @ _dense(x, self.dims) @ other.isometry()

    def embed(self, m: np.ndarray, other: "BlockSubspace | None" = None) -> np.ndarray:
        """Dense operator ``V m W*`` on ``sum h_i`` from subspace coordinates."""
        other = self if other is None else other
        return self.isometry() @ m @ dagger(other.isometry())

    def contains(self, other: "BlockSubspace", tol: float = 1e-8) -> bool:
        return all(np.linalg.norm(o - self.blocks[lab] @ (dagger(self.blocks[lab]) @ o)) <= tol
                   for lab, o in other.blocks.items() if o.shape[1])

    def overlap(self, other: "BlockSubspace") -> float:
        """Largest cosine between the two subspaces (0 when orthogonal)."""
        m = dagger(self.isometry()) @ other.isometry()
        return float(np.linalg.norm(m, 2)) if m.size else 0.0

    def __repr__(self):
        return f"BlockSubspace(dim={self.dim}, sites={self.site_dims()})"


def _dense(x: BlockOperator, dims: Mapping[str, int]) -> np.ndarray:
    n = sum(dims.values())
    out = np.zeros((n, n), dtype=complex)
    off = 0
    for lab, d in dims.items():
        out[off:off + d, off:off + d] = x[lab]
        off += d
    return out


def restrict(walk: WalkModel, sub: BlockSubspace, name: str | None = None) -> WalkModel:
    """Compression of ``walk`` to an enclosure: ``L -> V_i* L V_j`` on sites with ``V_i != 0``.

    Trace preservation of the result relies on ``sub`` being an enclosure.
    """
    keep = [lab for lab in walk.labels if sub[lab].shape[1]]
    sites = [SiteSpace(lab, sub[lab].shape[1]) for lab in keep]
    edges = []
    for e in walk.edges:
        if e.source in keep and e.target in keep:
            vi, vj = sub[e.target], sub[e.source]
            edges.append(TransitionEdge(e.source, e.target,
                                        tuple(dagger(vi) @ op @ vj for op in e.kraus)))
    return WalkModel(sites, edges, name or f"{walk.name}|restricted")


def lift_operator(walk: WalkModel, sub: BlockSubspace, x: BlockOperator) -> BlockOperator:
    """Embed a block operator of the restricted walk back into ``walk``'s space."""
    blocks = {}
    for lab in walk.labels:
        b = sub[lab]
        if b.shape[1]:
            blocks[lab] = b @ x[lab] @ dagger(b)
    return BlockOperator(walk.dims, blocks)
