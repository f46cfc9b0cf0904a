"""Kalman matrix, its rank, the controllable subspace and the block
decomposition that exposes it."""
from dataclasses import dataclass

import numpy as np

from .numerics import DEFAULT_RANK_TOL, numerical_rank, orthonormal_completion

CONTROLLABLE = "Controllable"
DEFICIENT = "Deficient"


@dataclass(frozen=True)
class KalmanAnalysis:
    kalman_matrix: np.ndarray
    rank: int
    subspace_basis: np.ndarray
    verdict: str

    @property
    def controllable(self):
        return self.verdict == CONTROLLABLE

    def describe(self):
        return CONTROLLABLE if self.controllable else f"{DEFICIENT}({self.rank})"


@dataclass(frozen=True)
class ControllableDecomposition:
    """Orthogonal change of basis ``P`` putting ``(A, B)`` in block form.

    The first ``n_prime`` columns of ``P`` span the controllable subspace,
    so ``A_new = P.T @ A @ P`` has a zero lower-left block and the last
    ``n - n_prime`` rows of ``B_new = P.T @ B`` vanish.
    """

    P: np.ndarray
    A_new: np.ndarray
    B_new: np.ndarray
    n_prime: int


def build_kalman_matrix(sys, powers=None):
    """Return ``[B | AB | ... | A^(powers-1) B]``; ``powers`` defaults to n."""
    n = sys.n
    powers = n if powers is None else powers
    blocks = [sys.B]
    for _ in range(1, powers):
        blocks.append(sys.A @ blocks[-1])
    return np.hstack(blocks)


def analyze(sys, tol=DEFAULT_RANK_TOL):
    K = build_kalman_matrix(sys)
    rr = numerical_rank(K, tol)
    verdict = CONTROLLABLE if rr.rank == sys.n else DEFICIENT
    return KalmanAnalysis(K, rr.rank, rr.basis, verdict)


def decompose(sys, tol=DEFAULT_RANK_TOL):
    analysis = analyze(sys, tol)
    P = orthonormal_completion(analysis.subspace_basis, sys.n)
    return ControllableDecomposition(P, P.T @ sys.A @ P, P.T @ sys.B, analysis.rank)


def invariance_residual(A, basis):
    """Relative size of the part of ``A @ basis`` outside ``span(basis)``."""
    if basis.shape[1] == 0:
        return 0.0
    image = A @ basis
    outside = image - basis @ (basis.T @ image)
    scale = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    return float(np.linalg.norm(outside, 2) / scale)
