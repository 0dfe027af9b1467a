"""Dense complex linear-algebra kernel.

Conventions used throughout the package:

* matrices are ``numpy`` arrays of dtype ``complex128`` (row-major);
* a family of vectors is stored as the *columns* of a 2-D array;
* vectorization is column stacking, ``vec(A X B) = (B.T kron A) vec(X)``.

All functions are pure and LAPACK-backed through :mod:`numpy.linalg`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import NumericalError, StructuralError

DEFAULT_RANK_TOL = 1e-9
CLUSTER_GAP = 1e-7


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise StructuralError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise StructuralError(f"{name} has non-finite entries")
    return a


def as_columns(vectors, dim: int | None = None) -> np.ndarray:
    """Stack vectors (a list of 1-D arrays or a 2-D array of columns) as columns."""
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        cols = vectors.astype(complex)
    else:
        vectors = [np.asarray(v, dtype=complex).ravel() for v in vectors]
        if not vectors:
            if dim is None:
                raise StructuralError("cannot infer dimension of an empty vector family")
            return np.zeros((dim, 0), dtype=complex)
        sizes = {v.size for v in vectors}
        if len(sizes) != 1:
            raise StructuralError(f"vectors have mismatched dimensions {sorted(sizes)}")
        cols = np.stack(vectors, axis=1)
    if dim is not None and cols.shape[0] != dim:
        raise StructuralError(f"expected vectors of dimension {dim}, got {cols.shape[0]}")
    return cols


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def opnorm(m: np.ndarray) -> float:
    """Operator 2-norm (largest singular value); 0 for empty matrices."""
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def orthonormal_extend(basis, candidates, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Extend an orthonormal family by the span of ``candidates``.

    Each candidate is orthogonalized (two Gram-Schmidt passes) against the
    current family; it is dropped when the residual norm is below ``tol``
    and otherwise normalized and appended. Returns the extended family as
    columns, with the original ``basis`` columns first and unchanged.
    """
    if isinstance(candidates, np.ndarray) and candidates.ndim == 2:
        cand = candidates.astype(complex) if candidates.shape[1] else None
    else:
        cand = as_columns(candidates) if len(candidates) else None
    dim = None if cand is None else cand.shape[0]
    q = as_columns(basis, dim)
    if cand is None:
        return q.copy()
    if q.shape[0] != cand.shape[0]:
        raise StructuralError(
            f"basis has dimension {q.shape[0]} but candidates have {cand.shape[0]}"
        )
    out = [q[:, k] for k in range(q.shape[1])]
    for k in range(cand.shape[1]):
        v = cand[:, k].copy()
        for _ in range(2):
            for u in out:
                v -= u * np.vdot(u, v)
        nrm = np.linalg.norm(v)
        if nrm >= tol:
            out.append(v / nrm)
    return as_columns(out, q.shape[0])


@dataclass(frozen=True)
class EigResult:
    """Eigenpairs of a general square matrix.

    ``values`` are sorted by decreasing modulus, then by argument. ``vectors``
    holds unit right eigenvectors as columns. ``defective`` is set when the
    eigenvector matrix is numerically singular (the matrix is not
    diagonalizable, e.g. a Jordan block).
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    defective: bool


def eig_general(m, rtol: float = 1e-9) -> EigResult:
    a = as_matrix(m)
    n = a.shape[0]
    if a.shape != (n, n):
        raise StructuralError(f"eig_general needs a square matrix, got {a.shape}")
    if n > 4096:
        raise StructuralError(f"dimension {n} exceeds the dense solver limit 4096")
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
    order = np.lexsort((np.round(np.angle(w), 12), -np.round(np.abs(w), 12)))
    w, v = w[order], v[:, order]
    v = v / np.linalg.norm(v, axis=0, keepdims=True)
    residuals = np.linalg.norm(a @ v - v * w, axis=0)
    scale = opnorm(a)
    if np.any(residuals > rtol * scale) and scale > 0:
        raise NumericalError(
            f"eigenpair residual {residuals.max():.3e} exceeds {rtol:g} * |m| = {rtol * scale:.3e}"
        )
    sv = np.linalg.svd(v, compute_uv=False) if n else np.ones(0)
    defective = bool(n and sv[-1] < 1e-7 * sv[0])
    return EigResult(w, v, residuals, defective)


def eig_hermitian(m, rtol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of a Hermitian matrix."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise StructuralError(f"eig_hermitian needs a square matrix, got {a.shape}")
    scale = opnorm(a)
    if opnorm(a - dagger(a)) > rtol * scale:
        raise StructuralError("eig_hermitian received a non-Hermitian matrix")
    w, v = np.linalg.eigh((a + dagger(a)) / 2)
    return w, v


def null_space(m, tol: float = DEFAULT_RANK_TOL, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of ``{v : |m v| <= tol * scale}``.

    ``scale`` defaults to ``|m|``. Pass the norm of the original operator when
    ``m`` is a shifted one such as ``S - Id``, whose own norm can be tiny.
    """
    a = as_matrix(m)
    rows, cols = a.shape
    if cols == 0:
        return np.zeros((0, 0), dtype=complex)
    if rows == 0:
        return np.eye(cols, dtype=complex)
    _, s, vh = np.linalg.svd(a)
    if scale is None:
        scale = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * scale)) if scale > 0 else 0
    return dagger(vh[rank:, :])


def trace_norm(m) -> float:
    a = as_matrix(m)
    if a.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def cluster_values(values: Iterable[complex], gap: float = CLUSTER_GAP) -> list[list[int]]:
    """Group indices of values closer than ``gap`` (single linkage, stable order)."""
    vals = list(values)
    parent = list(range(len(vals)))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a in range(len(vals)):
        for b in range(a + 1, len(vals)):
            if abs(vals[a] - vals[b]) <= gap:
                parent[find(b)] = find(a)
    groups: dict[int, list[int]] = {}
    for k in range(len(vals)):
        groups.setdefault(find(k), []).append(k)
    return sorted(groups.values(), key=lambda g: g[0])


def psd_part(h: np.ndarray, sign: int = 1) -> np.ndarray:
    """Positive (``sign=1``) or negative (``sign=-1``) part of a Hermitian matrix."""
    w, v = np.linalg.eigh((h + dagger(h)) / 2)
    w = np.clip(sign * w, 0.0, None)
    return (v * w) @ dagger(v)


def range_basis(m: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the range of ``m`` (singular values above ``tol * |m|``)."""
    if m.size == 0:
        return np.zeros((m.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(m)
    if not s.size or s[0] == 0:
        return np.zeros((m.shape[0], 0), dtype=complex)
    return u[:, : int(np.sum(s > tol * s[0]))]


def polar_unitary(m: np.ndarray) -> np.ndarray:
    """Unitary factor ``U`` of the polar decomposition ``m = U |m|``."""
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
