# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scanline DP for the truncated-L2 / truncated-quadratic line cost.

States are disparities ``d in [-D, D]`` stored at index ``k = d + D``.  The
transition splits the smoothness term into an exact near band ``|jump| < K``
(``psi`` table) and a flat ``far`` cost reached from the running minimum,
which keeps each step O(D * K) instead of O(D^2).
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double INF = float("inf")


cdef inline Py_ssize_t _clamp(Py_ssize_t v, Py_ssize_t hi) noexcept nogil:
    if v < 0:
        return 0
    if v > hi:
        return hi
    return v


cdef double _dp(const double* x, const double* y, Py_ssize_t n, double r, Py_ssize_t D,
                bint mono, const double* psi, Py_ssize_t K, double far,
                double* prev, double* cur, int* back) noexcept nogil:
    cdef Py_ssize_t S = 2 * D + 1
    cdef Py_ssize_t i, k, j, idx, barg, marg, garg
    cdef double diff, best, v, m, gmin, phi
    cdef double* tmp

    for k in range(S):
        idx = _clamp(k - D, n - 1)
        diff = x[0] - y[idx]
        phi = diff * diff
        prev[k] = phi if phi < r else r

    for i in range(1, n):
        gmin = INF
        garg = 0
        if not mono:
            for k in range(S):
                if prev[k] < gmin:
                    gmin = prev[k]
                    garg = k
        m = INF
        marg = 0
        for k in range(S):
            if mono:
                if prev[k] < m:
                    m = prev[k]
                    marg = k
            else:
                m = gmin
                marg = garg
            best = prev[k]
            barg = k
            for j in range(1, K):
                if k - j >= 0:
                    v = prev[k - j] + psi[j]
                    if v < best:
                        best = v
                        barg = k - j
                if not mono and k + j < S:
                    v = prev[k + j] + psi[j]
                    if v < best:
                        best = v
                        barg = k + j
            v = m + far
            if v < best:
                best = v
                barg = marg
            idx = _clamp(i + k - D, n - 1)
            diff = x[i] - y[idx]
            phi = diff * diff
            cur[k] = best + (phi if phi < r else r)
            if back != NULL:
                back[i * S + k] = <int>barg
        tmp = prev
        prev = cur
        cur = tmp

    best = INF
    for k in range(S):
        if prev[k] < best:
            best = prev[k]
            barg = k
    if back != NULL:
        back[0] = <int>barg  # row 0 holds the final argmin
    return best


cdef double _dp_cost(const double* x, const double* y, Py_ssize_t n, double r, Py_ssize_t D,
                     bint mono, const double* psi, Py_ssize_t K, double far,
                     double* prev, double* cur) noexcept nogil:
    """Cost-only DP: one fused branch-light pass per sample, no back-pointers."""
    cdef Py_ssize_t S = 2 * D + 1
    cdef Py_ssize_t i, k, j
    cdef double diff, v, m, b, xi
    cdef double* tmp

    for k in range(S):
        diff = x[0] - y[_clamp(k - D, n - 1)]
        v = diff * diff
        prev[k] = v if v < r else r

    for i in range(1, n):
        xi = x[i]
        m = prev[0]
        if not mono:
            for k in range(1, S):
                m = prev[k] if prev[k] < m else m
        for k in range(S):
            if mono:
                m = prev[k] if prev[k] < m else m
            b = prev[k]
            for j in range(1, K):
                if k - j >= 0:
                    v = prev[k - j] + psi[j]
                    b = v if v < b else b
                if not mono and k + j < S:
                    v = prev[k + j] + psi[j]
                    b = v if v < b else b
            v = m + far
            b = v if v < b else b
            diff = xi - y[_clamp(i + k - D, n - 1)]
            v = diff * diff
            cur[k] = b + (v if v < r else r)
        tmp = prev
        prev = cur
        cur = tmp

    m = prev[0]
    for k in range(1, S):
        m = prev[k] if prev[k] < m else m
    return m


def match_one(const double[::1] x, const double[::1] y, double r, Py_ssize_t D, bint mono,
              const double[::1] psi, double far):
    """Optimal total cost and disparities for one profile pair."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t S = 2 * D + 1
    cdef Py_ssize_t K = psi.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] back = np.zeros((n, S), dtype=np.int32)
    cdef double[::1] prev = np.empty(S)
    cdef double[::1] cur = np.empty(S)
    cdef double total
    cdef int[:, ::1] bv = back
    with nogil:
        total = _dp(&x[0], &y[0], n, r, D, mono, &psi[0], K, far, &prev[0], &cur[0], &bv[0, 0])
    d = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t k = back[0, 0]
    cdef Py_ssize_t i
    for i in range(n - 1, -1, -1):
        d[i] = k - D
        if i > 0:
            k = back[i, k]
    return total, d


def cost_pairs(const double[:, ::1] X, const double[:, ::1] Y, double r, Py_ssize_t D, bint mono,
               const double[::1] psi, double far, int threads=1):
    """Totals for row-aligned pairs ``(X[b], Y[b])``."""
    cdef Py_ssize_t B = X.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t S = 2 * D + 1
    cdef Py_ssize_t K = psi.shape[0]
    cdef double[::1] out = np.empty(B)
    cdef Py_ssize_t b
    cdef double* buf
    if B == 0:
        return np.asarray(out)
    for b in prange(B, nogil=True, schedule="static", num_threads=threads):
        buf = <double*>malloc(2 * S * sizeof(double))
        out[b] = _dp_cost(&X[b, 0], &Y[b, 0], n, r, D, mono, &psi[0], K, far, buf, buf + S)
        free(buf)
    return np.asarray(out)


def cost_grid(const double[:, ::1] X, const double[:, ::1] Y, double r, Py_ssize_t D, bint mono,
              const double[::1] psi, double far, int threads=1):
    """Totals for every pair ``(X[i], Y[j])``."""
    cdef Py_ssize_t n1 = X.shape[0]
    cdef Py_ssize_t n2 = Y.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t S = 2 * D + 1
    cdef Py_ssize_t K = psi.shape[0]
    cdef double[:, ::1] out = np.empty((n1, n2))
    cdef Py_ssize_t q, i, j
    cdef double* buf
    if n1 == 0 or n2 == 0:
        return np.asarray(out)
    for q in prange(n1 * n2, nogil=True, schedule="static", num_threads=threads):
        i = q // n2
        j = q % n2
        buf = <double*>malloc(2 * S * sizeof(double))
        out[i, j] = _dp_cost(&X[i, 0], &Y[j, 0], n, r, D, mono, &psi[0], K, far, buf, buf + S)
        free(buf)
    return np.asarray(out)
