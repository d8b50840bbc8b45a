# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot numeric kernels (see kernels/pure.py)."""

import numpy as np

from libc.math cimport exp, log, INFINITY
from libc.stdint cimport int64_t


cdef double _LOG_SQRT_2PI = 0.9189385332046727  # log(sqrt(2*pi))


cdef Py_ssize_t _lower_bound(const double[::1] a, double x) nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def kde_logpdf(const double[::1] train, double h, const double[::1] query):
    """Log Gaussian-KDE density at each query point; `train` sorted ascending.

    Kernels farther than 39 bandwidths underflow to exactly zero in double
    precision, so restricting the sum to a +-39h window is exact.
    """
    cdef Py_ssize_t n = train.shape[0]
    cdef Py_ssize_t m = query.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double norm = log(<double> n) + log(h) + _LOG_SQRT_2PI
    cdef double inv2h2 = 1.0 / (2.0 * h * h)
    cdef double span = 39.0 * h
    cdef Py_ssize_t i, j, lo, hi, nearest
    cdef double q, d, emax, s

    with nogil:
        for j in range(m):
            q = query[j]
            lo = _lower_bound(train, q - span)
            hi = _lower_bound(train, q + span)
            if lo >= hi:
                # all kernels underflow; report the nearest one alone
                nearest = _lower_bound(train, q)
                if nearest >= n:
                    nearest = n - 1
                elif nearest > 0 and q - train[nearest - 1] < train[nearest] - q:
                    nearest = nearest - 1
                d = q - train[nearest]
                out[j] = -d * d * inv2h2 - norm
                continue
            emax = -INFINITY
            for i in range(lo, hi):
                d = q - train[i]
                d = -d * d * inv2h2
                if d > emax:
                    emax = d
            s = 0.0
            for i in range(lo, hi):
                d = q - train[i]
                s += exp(-d * d * inv2h2 - emax)
            out[j] = emax + log(s) - norm
    return out_arr


def gini_scan(const double[::1] values, const int64_t[::1] classes, int n_classes):
    """Best Gini split of one sorted feature; see pure.gini_scan for the contract."""
    cdef Py_ssize_t n = values.shape[0]
    if n < 2:
        return -1.0, 0.0
    counts_arr = np.zeros(n_classes, dtype=np.float64)
    left_arr = np.zeros(n_classes, dtype=np.float64)
    cdef double[::1] total = counts_arr
    cdef double[::1] left = left_arr
    cdef Py_ssize_t i, c
    cdef double parent = 1.0, nl, nr, gl, gr, gain, best_gain = -1.0
    cdef double best_thr = 0.0, child, p
    cdef double dn = <double> n

    for i in range(n):
        total[classes[i]] += 1.0
    for c in range(n_classes):
        p = total[c] / dn
        parent -= p * p

    for i in range(n - 1):
        left[classes[i]] += 1.0
        if values[i] == values[i + 1]:
            continue
        nl = <double> (i + 1)
        nr = dn - nl
        gl = 1.0
        gr = 1.0
        for c in range(n_classes):
            p = left[c] / nl
            gl -= p * p
            p = (total[c] - left[c]) / nr
            gr -= p * p
        child = (nl * gl + nr * gr) / dn
        gain = parent - child
        if gain > best_gain:
            best_gain = gain
            best_thr = 0.5 * (values[i] + values[i + 1])
    if best_gain < 0.0:
        return -1.0, 0.0
    return best_gain, best_thr
