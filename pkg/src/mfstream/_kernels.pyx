# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, exp, log, sqrt

cnp.import_array()


def segment_variances(profile, Py_ssize_t s, basis):
    cdef const double[::1] y = np.ascontiguousarray(profile, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(basis, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t ns = n // s
    cdef Py_ssize_t k = b.shape[0]
    cdef Py_ssize_t v, i, j
    cdef double acc, c
    cdef const double* seg
    cdef const double* row
    resid_buf = np.empty(s, dtype=np.float64)
    cdef double[::1] rb = resid_buf
    cdef double* r = &rb[0]
    out = np.empty(2 * ns, dtype=np.float64)
    cdef double[::1] o = out

    with nogil:
        for v in range(2 * ns):
            if v < ns:
                seg = &y[v * s]
            else:
                seg = &y[n - (2 * ns - v) * s]
            for i in range(s):
                r[i] = seg[i]
            # project out one orthonormal basis row at a time; each pass is a
            # contiguous dot product followed by a contiguous axpy
            for j in range(k):
                row = &b[j, 0]
                c = 0.0
                for i in range(s):
                    c += row[i] * seg[i]
                for i in range(s):
                    r[i] -= c * row[i]
            acc = 0.0
            for i in range(s):
                acc += r[i] * r[i]
            o[v] = acc / s
    return out


def log_mean_power(logv, exps, double count):
    cdef const double[::1] lv = np.ascontiguousarray(logv, dtype=np.float64)
    cdef const double[::1] ex = np.ascontiguousarray(exps, dtype=np.float64)
    cdef Py_ssize_t m = lv.shape[0]
    cdef Py_ssize_t nq = ex.shape[0]
    cdef Py_ssize_t a, i
    cdef double e, peak, t, acc, lc
    out = np.empty(nq, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        lc = log(count)
        for a in range(nq):
            e = ex[a]
            peak = -INFINITY
            for i in range(m):
                t = e * lv[i]
                if t > peak:
                    peak = t
            acc = 0.0
            for i in range(m):
                acc += exp(e * lv[i] - peak)
            o[a] = peak + log(acc) - lc
    return out


def ar1_filter(z, double phi, double sigma):
    cdef const double[::1] e = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0]
    cdef Py_ssize_t i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double x
    with nogil:
        x = e[0] * sigma / sqrt(1.0 - phi * phi)
        o[0] = x
        for i in range(1, n):
            x = phi * x + sigma * e[i]
            o[i] = x
    return out
