"""Open quantum random walks: definition, validation and one-step action.

A walk lives on a finite vertex set ``V``; vertex ``i`` carries an internal
space of dimension ``dims[i]``. Every directed edge ``j -> i`` carries a
non-empty list of Kraus matrices of shape ``dims[i] x dims[j]`` (the plain
walk is the one-matrix case). The walk acts on block-diagonal states
``rho = sum_i rho(i) (x) |i><i|`` by

    M(rho)(i) = sum_j sum_{L on j->i} L rho(j) L*

and is trace preserving exactly when ``sum_{edges out of j} L*L = Id`` at
every vertex ``j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import StochasticityError, StructuralError
from .numerics import as_matrix, dagger, opnorm, trace_norm

VALIDATION_TOL = 1e-10


@dataclass(frozen=True)
class SiteSpace:
    id: str
    dim: int


def _frozen(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class TransitionEdge:
    """Kraus family carried by the directed edge ``source -> target``."""

    source: str
    target: str
    kraus: tuple

    def __post_init__(self):
        ops = tuple(_frozen(as_matrix(k, f"kraus operator on {self.source}->{self.target}"))
                    for k in self.kraus)
        if not ops:
            raise StructuralError(f"edge {self.source}->{self.target} has no Kraus operators")
        object.__setattr__(self, "kraus", ops)


class WalkModel:
    """An (extended) open quantum random walk on a finite graph.

    Immutable after construction. Structural consistency (unique labels,
    known endpoints, matching shapes, one edge per ordered pair) is checked
    here; stochasticity is checked separately by :func:`validate`.
    """

    def __init__(self, sites: Iterable[SiteSpace], edges: Iterable[TransitionEdge],
                 name: str = "walk"):
        self.name = name
        self.sites = tuple(sites)
        self.edges = tuple(edges)
        labels = [s.id for s in self.sites]
        if not labels:
            raise StructuralError("a walk needs at least one site")
        if len(set(labels)) != len(labels):
            dup = sorted({x for x in labels if labels.count(x) > 1})
            raise StructuralError(f"duplicate site ids: {dup}")
        for s in self.sites:
            if int(s.dim) != s.dim or s.dim < 1:
                raise StructuralError(f"site {s.id!r} has invalid dimension {s.dim!r}")
        self.labels = tuple(labels)
        self.dims = {s.id: int(s.dim) for s in self.sites}
        self.index = {lab: k for k, lab in enumerate(self.labels)}
        self.offsets = {}
        off = 0
        for lab in self.labels:
            self.offsets[lab] = off
            off += self.dims[lab]
        self.total_dim = off

        self._edge = {}
        self._out = {lab: [] for lab in self.labels}
        self._in = {lab: [] for lab in self.labels}
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in self.dims:
                    raise StructuralError(
                        f"edge {e.source}->{e.target} references unknown site {end!r}")
            if (e.source, e.target) in self._edge:
                raise StructuralError(f"duplicate edge {e.source}->{e.target}")
            shape = (self.dims[e.target], self.dims[e.source])
            for k, op in enumerate(e.kraus):
                if op.shape != shape:
                    raise StructuralError(
                        f"edge {e.source}->{e.target} kraus[{k}] has shape {op.shape}, "
                        f"expected {shape}")
            self._edge[(e.source, e.target)] = e
            self._out[e.source].append(e)
            self._in[e.target].append(e)

    @classmethod
    def from_kraus(cls, dims: Mapping[str, int] | Sequence[tuple[str, int]],
                   kraus: Mapping[tuple[str, str], Sequence], name: str = "walk") -> "WalkModel":
        """Build from ``{(source, target): [L, ...]}``; empty lists are skipped."""
        items = dims.items() if isinstance(dims, Mapping) else dims
        sites = [SiteSpace(str(k), int(d)) for k, d in items]
        edges = [TransitionEdge(str(j), str(i), tuple(ops))
                 for (j, i), ops in kraus.items() if len(ops)]
        return cls(sites, edges, name)

    def edge(self, source: str, target: str) -> TransitionEdge | None:
        return self._edge.get((source, target))

    def outgoing(self, source: str) -> list[TransitionEdge]:
        return list(self._out[source])

    def incoming(self, target: str) -> list[TransitionEdge]:
        return list(self._in[target])

    def kraus_items(self) -> Iterator[tuple[str, str, np.ndarray]]:
        for e in self.edges:
            for op in e.kraus:
                yield e.source, e.target, op

    @property
    def is_plain(self) -> bool:
        """True when every edge carries a single Kraus operator."""
        return all(len(e.kraus) == 1 for e in self.edges)

    def check_site(self, label) -> str:
        label = str(label)
        if label not in self.dims:
            raise StructuralError(f"unknown site {label!r}; known sites: {list(self.labels)}")
        return label

    def same_as(self, other: "WalkModel", atol: float = 0.0) -> bool:
        if self.labels != other.labels or self.dims != other.dims:
            return False
        if set(self._edge) != set(other._edge):
            return False
        for key, e in self._edge.items():
            f = other._edge[key]
            if len(e.kraus) != len(f.kraus):
                return False
            if any(not np.allclose(a, b, rtol=0, atol=atol) for a, b in zip(e.kraus, f.kraus)):
                return False
        return True

    def __repr__(self):
        return (f"WalkModel(name={self.name!r}, sites={len(self.sites)}, "
                f"edges={len(self.edges)}, dim={self.total_dim})")


class BlockOperator:
    """Block-diagonal operator ``sum_i X(i) (x) |i><i|``.

    Used both for states (:data:`BlockState`) and observables
    (:data:`BlockObservable`). Blocks for every site are always present;
    sites omitted at construction get zero blocks.
    """

    __slots__ = ("dims", "blocks")

    def __init__(self, dims: Mapping[str, int], blocks: Mapping[str, np.ndarray] | None = None):
        self.dims = dict(dims)
        blocks = dict(blocks or {})
        unknown = set(map(str, blocks)) - set(self.dims)
        if unknown:
            raise StructuralError(f"blocks given for unknown sites {sorted(unknown)}")
        self.blocks = {}
        for lab, d in self.dims.items():
            if lab in blocks:
                b = as_matrix(blocks[lab], f"block at site {lab!r}")
                if b.shape != (d, d):
                    raise StructuralError(
                        f"block at site {lab!r} has shape {b.shape}, expected {(d, d)}")
                self.blocks[lab] = b.copy()
            else:
                self.blocks[lab] = np.zeros((d, d), dtype=complex)

    @classmethod
    def zeros(cls, walk: WalkModel) -> "BlockOperator":
        return cls(walk.dims)

    @classmethod
    def identity(cls, walk: WalkModel) -> "BlockOperator":
        return cls(walk.dims, {lab: np.eye(d) for lab, d in walk.dims.items()})

    @classmethod
    def pure(cls, walk: WalkModel, site, x=None) -> "BlockOperator":
        """``|x><x| (x) |site><site|`` with ``x`` normalized (default ``e_1``)."""
        site = walk.check_site(site)
        d = walk.dims[site]
        if x is None:
            x = np.eye(d)[0]
        x = np.asarray(x, dtype=complex).ravel()
        if x.size != d:
            raise StructuralError(f"vector of dimension {x.size} at site {site!r} (dim {d})")
        nrm = np.linalg.norm(x)
        if nrm == 0:
            raise StructuralError("zero vector cannot define a pure state")
        x = x / nrm
        return cls(walk.dims, {site: np.outer(x, x.conj())})

    @classmethod
    def maximally_mixed(cls, walk: WalkModel) -> "BlockOperator":
        n = walk.total_dim
        return cls(walk.dims, {lab: np.eye(d) / n for lab, d in walk.dims.items()})

    @classmethod
    def from_dense(cls, walk: WalkModel, m: np.ndarray) -> "BlockOperator":
        """Diagonal blocks of a dense operator on ``sum_i h_i`` (site order of ``walk``)."""
        blocks = {}
        for lab in walk.labels:
            o, d = walk.offsets[lab], walk.dims[lab]
            blocks[lab] = m[o:o + d, o:o + d]
        return cls(walk.dims, blocks)

    def to_dense(self, walk: WalkModel) -> np.ndarray:
        out = np.zeros((walk.total_dim, walk.total_dim), dtype=complex)
        for lab in walk.labels:
            o, d = walk.offsets[lab], walk.dims[lab]
            out[o:o + d, o:o + d] = self.blocks[lab]
        return out

    def __getitem__(self, label) -> np.ndarray:
        return self.blocks[str(label)]

    def __iter__(self):
        return iter(self.blocks)

    def items(self):
        return self.blocks.items()

    def _check(self, other: "BlockOperator"):
        if self.dims != other.dims:
            raise StructuralError("block operators live on different site spaces")

    def __add__(self, other):
        self._check(other)
        return BlockOperator(self.dims, {k: v + other.blocks[k] for k, v in self.blocks.items()})

    def __sub__(self, other):
        self._check(other)
        return BlockOperator(self.dims, {k: v - other.blocks[k] for k, v in self.blocks.items()})

    def __mul__(self, c):
        return BlockOperator(self.dims, {k: c * v for k, v in self.blocks.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def dagger(self) -> "BlockOperator":
        return BlockOperator(self.dims, {k: dagger(v) for k, v in self.blocks.items()})

    def trace(self) -> complex:
        return complex(sum(np.trace(v) for v in self.blocks.values()))

    def site_traces(self) -> dict[str, float]:
        return {k: float(np.trace(v).real) for k, v in self.blocks.items()}

    def inner(self, other: "BlockOperator") -> complex:
        """Hilbert-Schmidt product ``Tr(self* other)``."""
        self._check(other)
        return complex(sum(np.vdot(v, other.blocks[k]) for k, v in self.blocks.items()))

    def norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(v, v).real for v in self.blocks.values())))

    def trace_norm(self) -> float:
        return sum(trace_norm(v) for v in self.blocks.values() if v.size)

    def hermitian_error(self) -> float:
        return max((opnorm(v - dagger(v)) for v in self.blocks.values()), default=0.0)

    def min_eigenvalue(self) -> float:
        return min(float(np.linalg.eigvalsh((v + dagger(v)) / 2)[0]) for v in self.blocks.values())

    def is_state(self, tol: float = 1e-10) -> bool:
        return (self.hermitian_error() <= tol and self.min_eigenvalue() >= -tol
                and abs(self.trace() - 1) <= tol)

    def allclose(self, other: "BlockOperator", atol: float = 1e-12) -> bool:
        self._check(other)
        return all(np.allclose(v, other.blocks[k], rtol=0, atol=atol)
                   for k, v in self.blocks.items())

    def __repr__(self):
        return f"BlockOperator(sites={list(self.dims)})"


BlockState = BlockOperator
BlockObservable = BlockOperator


def trace_distance(a: BlockOperator, b: BlockOperator) -> float:
    """``|a - b|_1`` for block-diagonal operators (sum of per-block trace norms)."""
    return (a - b).trace_norm()


@dataclass
class ValidationReport:
    ok: bool
    tol: float
    deviations: dict[str, float] = field(default_factory=dict)

    @property
    def worst_site(self) -> str:
        return max(self.deviations, key=self.deviations.get)

    @property
    def worst_deviation(self) -> float:
        return max(self.deviations.values())


def stochasticity_deviations(walk: WalkModel) -> dict[str, float]:
    out = {}
    for j in walk.labels:
        d = walk.dims[j]
        acc = np.zeros((d, d), dtype=complex)
        for e in walk.outgoing(j):
            for op in e.kraus:
                acc += dagger(op) @ op
        out[j] = opnorm(acc - np.eye(d))
    return out


def validate(walk: WalkModel, tol: float = VALIDATION_TOL) -> ValidationReport:
    """Check ``sum_i sum_L L*L = Id`` at every source site (operator 2-norm)."""
    dev = stochasticity_deviations(walk)
    return ValidationReport(all(v <= tol for v in dev.values()), tol, dev)


def require_valid(walk: WalkModel, tol: float = VALIDATION_TOL) -> None:
    rep = validate(walk, tol)
    if not rep.ok:
        raise StochasticityError(
            f"walk {walk.name!r} is not stochastic: deviation {rep.worst_deviation:.3e} "
            f"at site {rep.worst_site!r} exceeds {tol:g}")


def _check_operand(walk: WalkModel, x: BlockOperator) -> None:
    if x.dims != walk.dims:
        raise StructuralError(
            f"operator dims {x.dims} do not match walk {walk.name!r} dims {walk.dims}")


def apply(walk: WalkModel, rho: BlockOperator) -> BlockOperator:
    """One step of the walk on a block-diagonal state."""
    _check_operand(walk, rho)
    out = {lab: np.zeros((d, d), dtype=complex) for lab, d in walk.dims.items()}
    for j, i, op in walk.kraus_items():
        out[i] += op @ rho.blocks[j] @ dagger(op)
    return BlockOperator(walk.dims, out)


def apply_dual(walk: WalkModel, x: BlockOperator) -> BlockOperator:
    """Heisenberg-picture step: ``X'(j) = sum_i sum_L L* X(i) L``."""
    _check_operand(walk, x)
    out = {lab: np.zeros((d, d), dtype=complex) for lab, d in walk.dims.items()}
    for j, i, op in walk.kraus_items():
        out[j] += dagger(op) @ x.blocks[i] @ op
    return BlockOperator(walk.dims, out)


def path_operator(walk: WalkModel, path: Sequence, kraus_indices: Sequence[int] | None = None
                  ) -> np.ndarray:
    """Composed transition operator ``L_{i_l,i_{l-1}} ... L_{i_1,i_0}`` along a vertex path.

    Absent edges contribute the zero operator. On multigraph walks the Kraus
    index used on each edge must be given through ``kraus_indices``.
    """
    labels = [walk.check_site(v) for v in path]
    if len(labels) < 2:
        raise StructuralError("a path needs at least two vertices (one edge)")
    if kraus_indices is not None and len(kraus_indices) != len(labels) - 1:
        raise StructuralError("need one Kraus index per edge of the path")
    out = np.eye(walk.dims[labels[0]], dtype=complex)
    for step, (j, i) in enumerate(zip(labels, labels[1:])):
        e = walk.edge(j, i)
        if e is None:
            return np.zeros((walk.dims[labels[-1]], walk.dims[labels[0]]), dtype=complex)
        if kraus_indices is None:
            if len(e.kraus) != 1:
                raise StructuralError(
                    f"edge {j}->{i} carries {len(e.kraus)} Kraus operators; pass kraus_indices")
            op = e.kraus[0]
        else:
            op = e.kraus[kraus_indices[step]]
        out = op @ out
    return out


def minimal_dilation(p, labels: Sequence | None = None, name: str = "dilation",
                     tol: float = 1e-10) -> WalkModel:
    """Walk with one-dimensional sites encoding a row-stochastic matrix ``p``.

    The edge ``j -> i`` carries ``sqrt(p[j, i])``; zero entries give no edge.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    if p.shape != (n, n):
        raise StructuralError(f"transition matrix must be square, got {p.shape}")
    if np.any(p < -tol) or np.max(np.abs(p.sum(axis=1) - 1), initial=0) > tol:
        raise StochasticityError("transition matrix is not row-stochastic")
    labels = [str(k + 1) for k in range(n)] if labels is None else [str(x) for x in labels]
    kraus = {}
    for a in range(n):
        for b in range(n):
            if p[a, b] > 0:
                kraus[(labels[a], labels[b])] = [np.array([[np.sqrt(p[a, b])]])]
    return WalkModel.from_kraus([(lab, 1) for lab in labels], kraus, name)


def check_generators(generators: Mapping[int, np.ndarray], tol: float = 1e-10) -> int:
    mats = [as_matrix(m) for m in generators.values()]
    if not mats:
        raise StructuralError("no generators given")
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        raise StructuralError("generators must share one square shape")
    dev = opnorm(sum(dagger(m) @ m for m in mats) - np.eye(d))
    if dev > tol:
        raise StochasticityError(f"generator family is not stochastic (deviation {dev:.3e})")
    return d


def lift_homogeneous(generators: Mapping[int, np.ndarray], n: int,
                     labels: Sequence | None = None, name: str | None = None) -> WalkModel:
    """Space-homogeneous walk on the cycle Z_n: ``i -> i + s (mod n)`` carries ``L_s``.

    Shifts that coincide modulo ``n`` share one edge whose Kraus list keeps
    the order of ``generators``.
    """
    d = check_generators(generators)
    labels = [str(k) for k in range(n)] if labels is None else [str(x) for x in labels]
    if len(labels) != n:
        raise StructuralError(f"need {n} labels, got {len(labels)}")
    kraus: dict[tuple[str, str], list] = {}
    for k in range(n):
        for s, op in generators.items():
            kraus.setdefault((labels[k], labels[(k + int(s)) % n]), []).append(op)
    return WalkModel.from_kraus([(lab, d) for lab in labels], kraus, name or f"homogeneous-Z{n}")


def local_map_apply(generators: Mapping[int, np.ndarray], eta) -> np.ndarray:
    """``eta -> sum_s L_s eta L_s*`` on the common internal space."""
    eta = as_matrix(eta)
    out = np.zeros_like(eta)
    for op in generators.values():
        op = as_matrix(op)
        if op.shape[1] != eta.shape[0] or eta.shape[0] != eta.shape[1]:
            raise StructuralError(f"generator shape {op.shape} does not act on {eta.shape}")
        out = out + op @ eta @ dagger(op)
    return out
