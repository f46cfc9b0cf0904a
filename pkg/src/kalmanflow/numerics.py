"""Dense linear-algebra kernels shared by the analyses.

Matrix exponentials go through the compiled kernel when it is available
(see :mod:`kalmanflow._backend`); ranks use a singular value decomposition.
"""
from dataclasses import dataclass

import numpy as np

from ._backend import kernels

DEFAULT_RANK_TOL = 1e-9
MAX_EXP_NORM = 50.0


@dataclass(frozen=True)
class RankResult:
    """Numerical rank of a matrix with an orthonormal basis of its range."""

    rank: int
    basis: np.ndarray
    tolerance_used: float
    singular_values: np.ndarray


def _finite_square(M, name="M"):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def mat_exp(M, s=1.0):
    """Return ``exp(s * M)``.

    Raises
    ------
    OverflowError
        If the 1-norm of ``s * M`` exceeds 50.
    """
    M = _finite_square(M)
    return kernels.expm(float(s) * M)


def exp_integral(M, s):
    """Return ``integral_0^s exp(-r M) dr``.

    Read off the upper-right block of ``exp(s * [[-M, I], [0, 0]])``.
    """
    M = _finite_square(M)
    k = M.shape[0]
    block = np.zeros((2 * k, 2 * k))
    block[:k, :k] = -M
    block[:k, k:] = np.eye(k)
    return kernels.expm(float(s) * block)[:k, k:].copy()


def numerical_rank(M, tol_rel=DEFAULT_RANK_TOL):
    """Rank of ``M`` counting singular values above ``tol_rel * sigma_max``.

    Parameters
    ----------
    M : array_like, shape (r, c)
    tol_rel : float
        Relative threshold, must be positive.

    Returns
    -------
    RankResult
        ``basis`` holds the leading left singular vectors (shape ``(r, rank)``).
    """
    if not tol_rel > 0:
        raise ValueError("tol_rel must be positive")
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    rows = M.shape[0]
    if M.size == 0:
        return RankResult(0, np.zeros((rows, 0)), 0.0, np.zeros(0))
    U, sv, _ = np.linalg.svd(M, full_matrices=False)
    if sv[0] == 0.0:
        return RankResult(0, np.zeros((rows, 0)), 0.0, sv)
    threshold = tol_rel * sv[0]
    rank = int(np.count_nonzero(sv > threshold))
    return RankResult(rank, U[:, :rank].copy(), threshold, sv)


def orthonormal_completion(basis, n):
    """Extend orthonormal columns ``basis`` (n x r) to an orthogonal n x n matrix.

    Column signs are fixed so the largest-magnitude entry of each column is
    positive; this makes coordinate-aligned subspaces come back as the
    identity.
    """
    basis = np.asarray(basis, dtype=np.float64).reshape(n, -1)
    r = basis.shape[1]
    if r == 0:
        P = np.eye(n)
    else:
        # Full SVD of the basis: first r left vectors span it, the rest complete it.
        U, _, _ = np.linalg.svd(basis, full_matrices=True)
        # Rotate the leading block back onto the given basis to keep its span exact.
        P = np.hstack([basis, U[:, r:]])
    for j in range(n):
        col = P[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            P[:, j] = -col
    return P
