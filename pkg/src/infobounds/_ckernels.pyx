# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled reduction kernels.

Every reduction uses Neumaier compensated summation in index order so the
result is bit-identical to the pure-Python implementation in ``_pykernels``.
"""

from libc.math cimport exp, log, fabs, INFINITY, isinf

import numpy as np


cdef inline double _neumaier(const double[::1] x) noexcept nogil:
    cdef double s = 0.0, c = 0.0, t, v
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        v = x[i]
        t = s + v
        if fabs(s) >= fabs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


cdef inline double _lse(const double[::1] x) noexcept nogil:
    cdef Py_ssize_t i, k = x.shape[0]
    cdef double m = -INFINITY, s = 0.0, c = 0.0, t, v
    for i in range(k):
        if x[i] > m:
            m = x[i]
    if isinf(m):
        return m
    for i in range(k):
        v = exp(x[i] - m)
        t = s + v
        if fabs(s) >= fabs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return m + log(s + c)


cdef inline double _wsum(const double[::1] log_w, const double[::1] f) noexcept nogil:
    cdef double s = 0.0, c = 0.0, t, v
    cdef Py_ssize_t i
    for i in range(log_w.shape[0]):
        if log_w[i] == -INFINITY:
            continue
        v = exp(log_w[i]) * f[i]
        t = s + v
        if fabs(s) >= fabs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def compensated_sum(const double[::1] x):
    return _neumaier(x)


def logsumexp(const double[::1] x):
    return _lse(x)


def logsumexp_rows(const double[:, ::1] x):
    cdef Py_ssize_t r
    out = np.empty(x.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for r in range(x.shape[0]):
            o[r] = _lse(x[r])
    return out


def weighted_sum(const double[::1] log_w, const double[::1] f):
    cdef double r
    if log_w.shape[0] != f.shape[0]:
        raise ValueError("length mismatch")
    with nogil:
        r = _wsum(log_w, f)
    return r


def masked_mass(const double[::1] log_w, const unsigned char[::1] mask):
    cdef double s = 0.0, c = 0.0, t, v
    cdef Py_ssize_t i
    if log_w.shape[0] != mask.shape[0]:
        raise ValueError("length mismatch")
    with nogil:
        for i in range(log_w.shape[0]):
            if not mask[i] or log_w[i] == -INFINITY:
                continue
            v = exp(log_w[i])
            t = s + v
            if fabs(s) >= fabs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
    return s + c


def weighted_sum_rows(const double[:, ::1] log_w, const double[:, ::1] f):
    cdef Py_ssize_t r
    if log_w.shape[0] != f.shape[0] or log_w.shape[1] != f.shape[1]:
        raise ValueError("shape mismatch")
    out = np.empty(log_w.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for r in range(log_w.shape[0]):
            o[r] = _wsum(log_w[r], f[r])
    return out


def suffix_mass(const double[::1] log_w):
    cdef Py_ssize_t i, k = log_w.shape[0]
    cdef double s = 0.0, c = 0.0, t, v
    out = np.zeros(k + 1, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(k - 1, -1, -1):
            if log_w[i] != -INFINITY:
                v = exp(log_w[i])
                t = s + v
                if fabs(s) >= fabs(v):
                    c += (s - t) + v
                else:
                    c += (v - t) + s
                s = t
            o[i] = s + c
    return out
