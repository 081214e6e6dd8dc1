"""Deterministic dense linear-algebra kernels: truncated SVD, pseudo-inverse,
orthogonal projection removal, and PCA.

All routines are pure functions of their inputs and carry a fixed sign
convention so that repeated runs (and serialized results) are reproducible:
the largest-magnitude entry of every left singular vector is made positive.
Inputs are validated to be finite; estimation matrices here are at most tens
of thousands of rows by ~10^3 columns, so exact LAPACK factorizations are
used throughout (no randomized or sparse paths).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError
from .validation import as_matrix, as_vector, check_count

__all__ = [
    "SvdResult",
    "OrthonormalBasis",
    "PcaResult",
    "topk_svd",
    "pseudo_inverse",
    "remove_projection",
    "pca",
]

DEFAULT_PINV_TOL = 1e-12
ORTHONORMAL_TOL = 1e-8


@dataclass(frozen=True)
class SvdResult:
    """Top-k singular triplets: ``u @ diag(sigma) @ vt`` is the best rank-k
    approximation of the input in Frobenius norm."""

    u: np.ndarray        # (m, k), orthonormal columns
    sigma: np.ndarray    # (k,), nonnegative, descending
    vt: np.ndarray       # (k, n), orthonormal rows

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vt


@dataclass(frozen=True)
class OrthonormalBasis:
    """Columns of a d x r matrix with orthonormal columns (r may be 0)."""

    columns: np.ndarray = field(repr=False)

    def __post_init__(self):
        cols = as_matrix(self.columns, "basis columns")
        if cols.shape[1] > cols.shape[0]:
            raise RangeError(
                f"basis rank {cols.shape[1]} exceeds ambient dimension {cols.shape[0]}"
            )
        gram = cols.T @ cols
        if gram.size and np.abs(gram - np.eye(cols.shape[1])).max() > ORTHONORMAL_TOL:
            from .errors import ValidationError

            raise ValidationError("basis columns are not orthonormal within 1e-8")
        cols = cols.copy()
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def empty(cls, dim: int) -> "OrthonormalBasis":
        return cls(np.zeros((dim, 0)))


@dataclass(frozen=True)
class PcaResult:
    components: OrthonormalBasis   # (d, k) principal directions
    coords: np.ndarray             # (n, k) centered data projected on components
    explained_variance: np.ndarray  # (k,), descending, 1/(n-1) convention
    mean: np.ndarray               # (d,) row mean that was subtracted


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> None:
    """In place: make the largest-magnitude entry of each left vector positive."""
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            vt[j, :] = -vt[j, :]


def topk_svd(a, k: int) -> SvdResult:
    """Return the k largest singular triplets of ``a``.

    Deterministic for a fixed input: LAPACK iteration order plus the
    positive-largest-entry sign convention. An all-zero matrix yields zero
    singular values with identity columns as the (arbitrary but pinned)
    orthonormal factors; centered estimation sets can legitimately be
    rank-deficient, so this is not an error.
    """
    a = as_matrix(a, "a")
    m, n = a.shape
    check_count(k, 1, min(m, n), "k")
    if not a.any():
        return SvdResult(
            u=np.eye(m)[:, :k],
            sigma=np.zeros(k),
            vt=np.eye(n)[:k, :],
        )
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u = u[:, :k].copy()
    s = s[:k].copy()
    vt = vt[:k, :].copy()
    _fix_signs(u, vt)
    return SvdResult(u=u, sigma=s, vt=vt)


def pseudo_inverse(a, tol: float = DEFAULT_PINV_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values at or below ``tol * sigma_max`` are treated as exact
    zeros; ``tol`` must be positive.
    """
    a = as_matrix(a, "a")
    if not tol > 0:
        raise RangeError(f"tol must be > 0, got {tol}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = tol * s[0] if s.size else 0.0
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def remove_projection(basis: OrthonormalBasis, e) -> np.ndarray:
    """Return ``e`` minus its orthogonal projection onto the basis span.

    Idempotent and linear; the result is orthogonal to every basis column.
    A rank-0 basis leaves the vector unchanged.
    """
    e = as_vector(e, "e")
    if e.shape[0] != basis.dim:
        from .errors import ValidationError

        raise ValidationError(
            f"vector length {e.shape[0]} does not match basis dimension {basis.dim}"
        )
    if basis.rank == 0:
        return e.copy()
    cols = basis.columns
    return e - cols @ (cols.T @ e)


def project_rows(x: np.ndarray, basis: OrthonormalBasis) -> np.ndarray:
    """Row-wise projection of an (n, d) array onto the basis span."""
    if basis.rank == 0:
        return np.zeros_like(x)
    cols = basis.columns
    return (x @ cols) @ cols.T


def pca(x, k: int) -> PcaResult:
    """PCA of the row-mean-centered matrix ``x``.

    Components are the top-k right singular vectors of the centered data;
    explained variances follow the sample-covariance 1/(n-1) convention.
    """
    x = as_matrix(x, "x")
    n, d = x.shape
    if n < 2:
        raise RangeError(f"pca needs at least 2 rows, got {n}")
    check_count(k, 1, min(n - 1, d), "k")
    mean = x.mean(axis=0)
    centered = x - mean
    svd = topk_svd(centered, k)
    components = OrthonormalBasis(svd.vt.T)
    coords = centered @ components.columns
    explained = svd.sigma**2 / (n - 1)
    return PcaResult(
        components=components,
        coords=coords,
        explained_variance=explained,
        mean=mean,
    )
