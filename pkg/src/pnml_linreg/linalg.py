"""Rank-aware dense linear algebra: SVD, Moore-Penrose pseudo-inverse,
row-space projections, and ridge solves.

All routines are pure functions of immutable inputs. Factorizations are
computed once and reused by the callers; quadratic forms are evaluated as
squared norms of a single matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RANK_TOL = 1e-12

# Relative threshold below which an orthogonal residual is snapped to zero,
# so downstream code takes the degenerate branch deterministically.
ORTH_CLAMP_TOL = 1e-12


class InputError(ValueError):
    """Raised for malformed numeric input (non-finite entries, bad shapes)."""


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD of an N x M matrix X, as X = right @ diag(s) @ left.T.

    ``left_vectors`` (M x r) holds the orthonormal eigenvectors of X^T X,
    ``right_vectors`` (N x r) the matching left factors, and
    ``singular_values`` the r strictly positive singular values, descending.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    numeric_rank: int

    def eigvals_correlation(self) -> np.ndarray:
        """Eigenvalues of the empirical correlation matrix X^T X / N."""
        n = self.right_vectors.shape[0]
        return self.singular_values**2 / n


@dataclass(frozen=True)
class PseudoInverse:
    """Moore-Penrose pseudo-inverse X^+ (M x N) with the rank it came from."""

    matrix: np.ndarray
    source_rank: int


def svd_decompose(x: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> SvdFactors:
    """Thin SVD of ``x`` truncated at numeric rank.

    Singular values below ``rank_tol`` times the largest are treated as zero.
    An all-zero matrix yields rank 0 with empty factors.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InputError(f"expected a 2-d matrix, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise InputError("matrix contains non-finite entries")
    if not 0.0 < rank_tol < 1.0:
        raise InputError(f"rank_tol must lie in (0, 1), got {rank_tol}")

    n, m = x.shape
    w, s, zt = np.linalg.svd(x, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > rank_tol * s[0]))
    return SvdFactors(
        left_vectors=np.ascontiguousarray(zt[:rank].T),
        singular_values=s[:rank].copy(),
        right_vectors=np.ascontiguousarray(w[:, :rank]),
        numeric_rank=rank,
    )


def pseudo_inverse(svd: SvdFactors) -> PseudoInverse:
    """X^+ = U diag(1/s) V^T restricted to the leading rank-r factors."""
    if svd.numeric_rank == 0:
        m = svd.left_vectors.shape[0]
        n = svd.right_vectors.shape[0]
        return PseudoInverse(matrix=np.zeros((m, n)), source_rank=0)
    inv_s = 1.0 / svd.singular_values
    matrix = (svd.left_vectors * inv_s) @ svd.right_vectors.T
    return PseudoInverse(matrix=matrix, source_rank=svd.numeric_rank)


def orth_residual_sq(x_pinv: PseudoInverse, x_mat: np.ndarray, x: np.ndarray) -> float:
    """Squared norm of the component of ``x`` orthogonal to the row space.

    Returns x^T (I - X^+ X) x, clamped to exactly 0 when it falls below
    ``ORTH_CLAMP_TOL`` times ||x||^2.
    """
    x = np.asarray(x, dtype=float)
    proj = x_pinv.matrix @ (np.asarray(x_mat, dtype=float) @ x)
    resid = x - proj
    r2 = float(resid @ resid)
    norm2 = float(x @ x)
    if r2 <= ORTH_CLAMP_TOL * norm2:
        return 0.0
    return r2


def ridge_solve(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Unique minimizer of ||y - X theta||^2 + lam ||theta||^2, lam > 0.

    Computed through the SVD as theta = sum_i u_i s_i / (s_i^2 + lam) v_i^T y,
    never forming an M x M inverse.
    """
    if lam <= 0.0:
        raise ValueError(f"ridge requires lam > 0, got {lam}")
    svd = svd_decompose(x)
    y = np.asarray(y, dtype=float)
    if svd.numeric_rank == 0:
        return np.zeros(np.asarray(x).shape[1])
    s = svd.singular_values
    a = svd.right_vectors.T @ y
    return svd.left_vectors @ (s * a / (s**2 + lam))
