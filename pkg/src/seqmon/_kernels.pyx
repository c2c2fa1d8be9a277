# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sequential inner loops. Semantics mirror ``_kernels_py``."""

import numpy as np

from libc.stdint cimport int64_t, uint64_t

cdef enum:
    MAX_DEGREE = 8

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL


def stream_update(double[:, :, ::1] sigma, double[:, ::1] gamma,
                  const double[:, ::1] phi, const int64_t[::1] arms,
                  const double[::1] y, Py_ssize_t n0):
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t q = phi.shape[1]
    cdef Py_ssize_t i, j, l, a, b
    cdef Py_ssize_t n = n0
    cdef double w, c, pj
    for i in range(m):
        n += 1
        w = 1.0 / n
        c = 1.0 - w
        a = arms[i]
        for b in range(2):
            if b == a:
                for j in range(q):
                    pj = phi[i, j]
                    for l in range(q):
                        sigma[b, j, l] = sigma[b, j, l] * c + w * (pj * phi[i, l])
                    gamma[b, j] = gamma[b, j] * c + w * (pj * y[i])
            else:
                for j in range(q):
                    for l in range(q):
                        sigma[b, j, l] = sigma[b, j, l] * c
                    gamma[b, j] = gamma[b, j] * c
    return n


def bspline_basis(const double[::1] x, const double[::1] knots, int degree,
                  double[:, ::1] out):
    cdef Py_ssize_t n_pts = x.shape[0]
    cdef Py_ssize_t nb = knots.shape[0] - degree - 1
    cdef Py_ssize_t p, span, lo, hi, mid, j, r
    cdef double xv, saved, temp
    cdef double vals[MAX_DEGREE + 1]
    cdef double left[MAX_DEGREE + 1]
    cdef double right[MAX_DEGREE + 1]
    if degree > MAX_DEGREE:
        raise ValueError("degree too large for compiled kernel")
    for p in range(n_pts):
        xv = x[p]
        if xv >= knots[nb]:
            span = nb - 1
        elif xv < knots[degree]:
            span = degree
        else:
            lo = degree
            hi = nb
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if knots[mid] <= xv:
                    lo = mid
                else:
                    hi = mid
            span = lo
        vals[0] = 1.0
        for j in range(1, degree + 1):
            left[j] = xv - knots[span + 1 - j]
            right[j] = knots[span + j] - xv
            saved = 0.0
            for r in range(j):
                temp = vals[r] / (right[r + 1] + left[j - r])
                vals[r] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            vals[j] = saved
        for j in range(nb):
            out[p, j] = 0.0
        for r in range(degree + 1):
            out[p, span - degree + r] = vals[r]


def greedy_run(const double[:, ::1] phi, const double[::1] u,
               const double[::1] y0, const double[::1] y1,
               double[:, :, ::1] P, double[:, ::1] beta, double eps,
               int64_t[::1] arms_out, double[::1] prop_out, double[::1] y_out):
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t q = phi.shape[1]
    cdef Py_ssize_t i, j, l, a
    cdef double score, p1, yi, denom, resid, fit, kj
    cdef double[::1] k = np.empty(q)
    for i in range(m):
        score = 0.0
        for j in range(q):
            score += phi[i, j] * beta[1, j]
        fit = 0.0
        for j in range(q):
            fit += phi[i, j] * beta[0, j]
        score = score - fit
        p1 = 1.0 - eps if score > 0.0 else eps
        a = 1 if u[i] < p1 else 0
        yi = y1[i] if a == 1 else y0[i]
        arms_out[i] = a
        prop_out[i] = p1
        y_out[i] = yi
        denom = 1.0
        fit = 0.0
        for j in range(q):
            kj = 0.0
            for l in range(q):
                kj += P[a, j, l] * phi[i, l]
            k[j] = kj
            denom += phi[i, j] * kj
            fit += phi[i, j] * beta[a, j]
        resid = yi - fit
        for j in range(q):
            beta[a, j] += k[j] * (resid / denom)
        for j in range(q):
            for l in range(q):
                P[a, j, l] -= k[j] * k[l] / denom


cdef inline uint64_t _splitmix(uint64_t z):
    z = z + _GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def reservoir_offer(double[:, ::1] points, Py_ssize_t seen,
                    const double[:, ::1] X, seed):
    cdef Py_ssize_t size = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef uint64_t key = _splitmix(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF))
    cdef Py_ssize_t i = seen
    cdef Py_ssize_t r, c, slot
    cdef uint64_t j
    for r in range(X.shape[0]):
        if i < size:
            slot = i
        else:
            j = _splitmix(key + <uint64_t>i * _GOLDEN) % <uint64_t>(i + 1)
            slot = <Py_ssize_t>j if j < <uint64_t>size else -1
        if slot >= 0:
            for c in range(d):
                points[slot, c] = X[r, c]
        i += 1
    return i
