# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: small dense matrix exponential and exact
piecewise-constant propagation.

Same algorithms as ``_kernels_py``; results agree to rounding.
"""
import numpy as np

from libc.math cimport ceil, fabs, isfinite, log2
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memset

DEF TAYLOR_DEGREE = 16
DEF THETA = 0.5
DEF MAX_NORM_C = 50.0

MAX_NORM = MAX_NORM_C


cdef inline void _matmul(const double* a, const double* b, double* out, int k) noexcept nogil:
    cdef int i, j, l
    cdef double acc
    for i in range(k):
        for j in range(k):
            acc = 0.0
            for l in range(k):
                acc = acc + a[i * k + l] * b[l * k + j]
            out[i * k + j] = acc


cdef int _expm(const double* m, double* out, double* x, double* tmp, int k) noexcept nogil:
    # Returns -1 when the 1-norm is out of range; out is left undefined then.
    cdef int i, j, d, squarings = 0
    cdef double norm = 0.0, col, scale
    for j in range(k):
        col = 0.0
        for i in range(k):
            col = col + fabs(m[i * k + j])
        if col > norm or not isfinite(col):
            norm = col
    if not isfinite(norm) or norm > MAX_NORM_C:
        return -1
    if norm > THETA:
        squarings = <int>ceil(log2(norm / THETA))
    scale = 1.0
    for i in range(squarings):
        scale = scale * 0.5
    for i in range(k * k):
        x[i] = m[i] * scale
    memset(out, 0, k * k * sizeof(double))
    for i in range(k):
        out[i * k + i] = 1.0
    for d in range(TAYLOR_DEGREE, 0, -1):
        _matmul(x, out, tmp, k)
        for i in range(k * k):
            tmp[i] = tmp[i] / d
        for i in range(k):
            tmp[i * k + i] = tmp[i * k + i] + 1.0
        memcpy(out, tmp, k * k * sizeof(double))
    for i in range(squarings):
        _matmul(out, out, tmp, k)
        memcpy(out, tmp, k * k * sizeof(double))
    return 0


def expm(M):
    """Exponential of a square matrix by scaling and squaring (degree-16 Taylor)."""
    cdef double[:, ::1] mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef int k = mv.shape[0]
    result = np.empty((k, k))
    if k == 0:
        return result
    cdef double[:, ::1] rv = result
    cdef double[:, ::1] x = np.empty((k, k))
    cdef double[:, ::1] tmp = np.empty((k, k))
    cdef int status
    with nogil:
        status = _expm(&mv[0, 0], &rv[0, 0], &x[0, 0], &tmp[0, 0], k)
    if status != 0:
        norm = np.abs(np.asarray(mv)).sum(axis=0).max()
        raise OverflowError(f"matrix 1-norm {norm:g} exceeds supported range {MAX_NORM_C:g}")
    return result


cdef int _propagate(const double* As, const double* Bs, int n, int m,
                    double* q, const double* durations, const double* controls,
                    int segments, double* aug, double* E, double* x, double* tmp,
                    double* qnew) noexcept nogil:
    cdef int k = n + m
    cdef int s, i, j
    cdef double sigma, acc
    memset(aug, 0, k * k * sizeof(double))
    for s in range(segments):
        sigma = durations[s]
        if sigma == 0.0:
            continue
        for i in range(n):
            for j in range(n):
                aug[i * k + j] = sigma * As[i * n + j]
            for j in range(m):
                aug[i * k + n + j] = sigma * Bs[i * m + j]
        if _expm(aug, E, x, tmp, k) != 0:
            return -1
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc = acc + E[i * k + j] * q[j]
            for j in range(m):
                acc = acc + E[i * k + n + j] * controls[s * m + j]
            qnew[i] = acc
        memcpy(q, qnew, n * sizeof(double))
    return 0


def propagate(As, Bs, q0, durations, controls):
    """Chain exact zero-order-hold steps of ``q' = As q + Bs c``."""
    out = propagate_batch(As, Bs, q0,
                          np.asarray(durations, dtype=np.float64).reshape(1, -1),
                          np.asarray(controls, dtype=np.float64).reshape(1, len(durations), -1))
    return out[0]


def propagate_batch(As, Bs, q0, durations, controls):
    """Endpoints of many piecewise-constant runs from a common start ``q0``.

    ``durations`` has shape (N, S) and ``controls`` (N, S, m).
    """
    cdef double[:, ::1] a = np.ascontiguousarray(As, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(Bs, dtype=np.float64)
    cdef double[::1] start = np.ascontiguousarray(q0, dtype=np.float64)
    cdef double[:, ::1] dur = np.ascontiguousarray(durations, dtype=np.float64)
    cdef double[:, :, ::1] ctl = np.ascontiguousarray(controls, dtype=np.float64)
    cdef int n = b.shape[0], m = b.shape[1]
    cdef int N = dur.shape[0], S = dur.shape[1]
    cdef int k = n + m
    cdef int i, status = 0
    out = np.empty((N, n))
    if N == 0 or n == 0:
        return out
    cdef double[:, ::1] ov = out
    cdef double* work = <double*>malloc((4 * k * k + n) * sizeof(double))
    if work == NULL:
        raise MemoryError()
    cdef double* aug = work
    cdef double* E = work + k * k
    cdef double* x = work + 2 * k * k
    cdef double* tmp = work + 3 * k * k
    cdef double* qnew = work + 4 * k * k
    try:
        with nogil:
            for i in range(N):
                memcpy(&ov[i, 0], &start[0], n * sizeof(double))
                status = _propagate(&a[0, 0], &b[0, 0], n, m, &ov[i, 0],
                                    &dur[i, 0] if S > 0 else NULL,
                                    &ctl[i, 0, 0] if S > 0 else NULL,
                                    S, aug, E, x, tmp, qnew)
                if status != 0:
                    break
    finally:
        free(work)
    if status != 0:
        raise OverflowError(f"segment exponential exceeds supported range {MAX_NORM_C:g}")
    return out
