"""Dense linear-algebra helpers with a fixed sign convention.

Every eigen/singular vector returned here is flipped so that its
largest-magnitude entry is positive (earliest index wins ties).  That makes
selected sensing rows reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidInputError

PINV_RTOL = 1e-12


@dataclass(frozen=True)
class EigPairs:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns are eigenvectors


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def as_vector(v, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return v


def normalize_signs(vectors: np.ndarray, axis: int = 0) -> np.ndarray:
    """Flip each vector so its largest-magnitude entry is positive.

    ``axis=0`` treats columns as vectors, ``axis=1`` treats rows.
    """
    v = np.array(vectors, dtype=float, copy=True)
    if v.size == 0:
        return v
    work = v if axis == 0 else v.T
    # argmax returns the first maximal index, which is the tie rule we want
    pivots = np.argmax(np.abs(work), axis=0)
    signs = np.sign(work[pivots, np.arange(work.shape[1])])
    signs[signs == 0] = 1.0
    work *= signs
    return v


def sym_eig(a) -> EigPairs:
    """Full eigendecomposition of a symmetric matrix, values descending."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"sym_eig needs a square matrix, got {a.shape}")
    a = 0.5 * (a + a.T)
    values, vectors = np.linalg.eigh(a)
    order = np.argsort(-values, kind="stable")
    return EigPairs(values[order], normalize_signs(vectors[:, order], axis=0))


def top_right_singular(a, r: int) -> np.ndarray:
    """Top-``r`` right singular vectors of ``a`` as orthonormal rows (r x cols)."""
    a = as_matrix(a)
    if r < 0 or r > min(a.shape):
        raise DimensionError(f"r={r} exceeds min(rows, cols)={min(a.shape)}")
    if r == 0:
        return np.zeros((0, a.shape[1]))
    _, _, vt = np.linalg.svd(a, full_matrices=False)
    return normalize_signs(vt[:r], axis=1)


def pinv(a, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via thin SVD.

    Singular values below ``rtol * sigma_max`` are treated as zero.
    """
    a = as_matrix(a)
    rows, cols = a.shape
    if a.size == 0:
        return np.zeros((cols, rows))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((cols, rows))
    keep = s > rtol * s[0]
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def orthonormal_complement_fill(
    rows: np.ndarray, count: int, dim: int, avoid: np.ndarray | None = None, tol: float = 1e-6
) -> np.ndarray:
    """Extend ``rows`` with ``count`` canonical directions made orthogonal to
    ``rows`` and ``avoid`` by Gram-Schmidt, scanning e_0, e_1, ... in order."""
    basis = [b for b in (avoid if avoid is not None else np.zeros((0, dim)))]
    basis += [b for b in rows]
    extra = []
    for j in range(dim):
        if len(extra) == count:
            break
        e = np.zeros(dim)
        e[j] = 1.0
        for _ in range(2):  # re-orthogonalize once for stability
            for b in basis:
                e -= (b @ e) * b
        n = np.linalg.norm(e)
        if n > tol:
            e /= n
            extra.append(e)
            basis.append(e)
    if len(extra) < count:
        raise DimensionError(f"cannot find {count} more directions orthogonal to the given rows")
    if not extra:
        return np.asarray(rows, dtype=float).reshape(-1, dim)
    return np.vstack([np.asarray(rows, dtype=float).reshape(-1, dim), np.array(extra)])


def principal_angles(a, b) -> np.ndarray:
    """Principal angles (radians) between the row spaces of ``a`` and ``b``."""
    from scipy.linalg import subspace_angles

    return subspace_angles(as_matrix(a).T, as_matrix(b).T)


def penrose_residuals(a, a_pinv) -> tuple[float, float, float, float]:
    """Max-abs residuals of the four Penrose conditions."""
    a = as_matrix(a)
    p = as_matrix(a_pinv)
    return (
        float(np.max(np.abs(a @ p @ a - a), initial=0.0)),
        float(np.max(np.abs(p @ a @ p - p), initial=0.0)),
        float(np.max(np.abs((a @ p).T - a @ p), initial=0.0)),
        float(np.max(np.abs((p @ a).T - p @ a), initial=0.0)),
    )
