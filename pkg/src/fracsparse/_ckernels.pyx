# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled O(N^2) loops for Toeplitz kernels on a 1D grid.

``krow[d]`` is the kernel weight between two cells ``d`` cells apart.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def toeplitz_apply(const double[::1] krow, const double[::1] f):
    cdef Py_ssize_t N = f.shape[0], i, j
    cdef double acc
    out = np.zeros(N)
    cdef double[::1] y = out
    for i in range(N):
        acc = 0.0
        for j in range(N):
            acc += krow[i - j if i >= j else j - i] * f[j]
        y[i] = acc
    return out


def commutator_apply(const double[::1] krow, const double[::1] b,
                     const double[::1] f, int m):
    cdef Py_ssize_t N = f.shape[0], i, j
    cdef int e
    cdef double acc, d, dm
    out = np.zeros(N)
    cdef double[::1] y = out
    for i in range(N):
        acc = 0.0
        for j in range(N):
            d = b[i] - b[j]
            dm = 1.0
            for e in range(m):
                dm *= d
            acc += dm * krow[i - j if i >= j else j - i] * f[j]
        y[i] = acc
    return out


def window_apply(const double[::1] krow, const double[::1] g,
                 Py_ssize_t wlo, Py_ssize_t whi, Py_ssize_t olo, Py_ssize_t ohi):
    """``sum_{j in [wlo, whi)} krow[|i-j|] g[j]`` for ``i in [olo, ohi)``."""
    cdef Py_ssize_t i, j
    cdef double acc
    out = np.zeros(ohi - olo)
    cdef double[::1] y = out
    for i in range(olo, ohi):
        acc = 0.0
        for j in range(wlo, whi):
            acc += krow[i - j if i >= j else j - i] * g[j]
        y[i - olo] = acc
    return out


def truncated_max(const double[::1] krow, const double[::1] g, const double[::1] u,
                  const cnp.int64_t[::1] qlo, const cnp.int64_t[::1] qsize,
                  const cnp.int64_t[::1] wlo, const cnp.int64_t[::1] whi):
    """Per cube c: max over cells i of the cube of ``|u[i] - sum_{W_c} krow g|``."""
    cdef Py_ssize_t C = qlo.shape[0], c, i, j
    cdef double acc, best, v
    out = np.zeros(C)
    cdef double[::1] res = out
    for c in range(C):
        best = 0.0
        for i in range(qlo[c], qlo[c] + qsize[c]):
            acc = 0.0
            for j in range(wlo[c], whi[c]):
                acc += krow[i - j if i >= j else j - i] * g[j]
            v = fabs(u[i] - acc)
            if v > best:
                best = v
        res[c] = best
    return out
