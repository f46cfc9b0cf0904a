"""Pure numpy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` operation for operation; it is used whenever the
compiled module is unavailable or ``KALMANFLOW_PURE_PYTHON`` is set.
"""
import math

import numpy as np

TAYLOR_DEGREE = 16
THETA = 0.5
MAX_NORM = 50.0


def expm(M):
    """Exponential of a square matrix by scaling and squaring.

    The scaled matrix has 1-norm at most ``THETA``; a degree-16 Taylor
    polynomial is then accurate far below double precision.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    k = M.shape[0]
    norm = np.abs(M).sum(axis=0).max() if k else 0.0
    if not np.isfinite(norm) or norm > MAX_NORM:
        raise OverflowError(f"matrix 1-norm {norm:g} exceeds supported range {MAX_NORM:g}")
    j = 0
    if norm > THETA:
        j = int(math.ceil(math.log2(norm / THETA)))
    X = M / (2.0 ** j)
    eye = np.eye(k)
    E = eye.copy()
    for d in range(TAYLOR_DEGREE, 0, -1):
        E = eye + (X @ E) / d
    for _ in range(j):
        E = E @ E
    return E


def propagate(As, Bs, q0, durations, controls):
    """Chain exact zero-order-hold steps of ``q' = As q + Bs c``."""
    n, m = Bs.shape
    aug = np.zeros((n + m, n + m))
    q = np.array(q0, dtype=np.float64)
    for sigma, c in zip(durations, controls):
        if sigma == 0.0:
            continue
        aug[:n, :n] = sigma * As
        aug[:n, n:] = sigma * Bs
        E = expm(aug)
        q = E[:n, :n] @ q + E[:n, n:] @ c
    return q


def propagate_batch(As, Bs, q0, durations, controls):
    """Run :func:`propagate` for every row of ``durations``/``controls``."""
    N = durations.shape[0]
    out = np.empty((N, Bs.shape[0]))
    for i in range(N):
        out[i] = propagate(As, Bs, q0, durations[i], controls[i])
    return out
