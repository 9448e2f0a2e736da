# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must agree bit-for-bit with ``_kernels_py``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport floor
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef uint64_t _SEED = 0x243F6A8885A308D3ULL
cdef uint64_t _MUL = 0x9E3779B97F4A7C15ULL


def grid_argmin(const double complex[:, ::1] y, const double complex[:, ::1] cand):
    cdef Py_ssize_t n = y.shape[0], k = cand.shape[0], L = y.shape[1]
    if cand.shape[1] != L:
        raise ValueError("observation and candidate lengths differ")
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] res = out
    cdef Py_ssize_t i, j, l, best_j
    cdef double best, acc, dr, di
    with nogil:
        for i in range(n):
            best = 1.0 / 0.0
            best_j = 0
            for j in range(k):
                acc = 0.0
                for l in range(L):
                    dr = y[i, l].real - cand[j, l].real
                    di = y[i, l].imag - cand[j, l].imag
                    acc = acc + (dr * dr + di * di)
                    if acc > best:
                        break
                if acc < best:
                    best = acc
                    best_j = j
            res[i] = best_j
    return out


def box_hash(const double[:, ::1] points, double sigma):
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], i, j
    idx_arr = np.empty((n, d), dtype=np.int64)
    h_arr = np.empty(n, dtype=np.uint64)
    cdef int64_t[:, ::1] idx = idx_arr
    cdef uint64_t[::1] hv = h_arr
    cdef uint64_t h
    cdef int64_t v
    with nogil:
        for i in range(n):
            h = _SEED
            for j in range(d):
                v = <int64_t> floor(points[i, j] / sigma)
                idx[i, j] = v
                h = h ^ (<uint64_t> v)
                h = h * _MUL
                h = h ^ (h >> 29)
            h = h ^ (h >> 31)
            h = h * 0xBF58476D1CE4E5B9ULL
            h = h ^ (h >> 27)
            hv[i] = h
    return idx_arr, h_arr
