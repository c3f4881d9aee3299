# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled hot kernels: candidate score fusion and edit-distance fill.

Must stay numerically identical to _pykernels: same association order in the
fused expression, plain double arithmetic, no reordering.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def fuse_scores(double ac_base, cnp.ndarray[double, ndim=1] row,
                cnp.ndarray[double, ndim=1] fst_comp,
                double lm_base, lv, double lam, double mu):
    cdef Py_ssize_t n = row.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] lmv
    cdef Py_ssize_t k
    if lv is None:
        for k in range(n):
            out[k] = (ac_base + row[k]) + lam * fst_comp[k]
    else:
        lmv = lv
        for k in range(n):
            out[k] = (ac_base + row[k]) + lam * fst_comp[k] + mu * (lm_base + lmv[k])
    return out


def levenshtein_fill(a, b):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] aa = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bb = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t m = bb.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] dist = np.empty((n + 1, m + 1), dtype=np.int32)
    cdef Py_ssize_t i, j
    cdef cnp.int32_t best, up, left, cost
    cdef cnp.int64_t ai
    for j in range(m + 1):
        dist[0, j] = <cnp.int32_t> j
    for i in range(1, n + 1):
        dist[i, 0] = <cnp.int32_t> i
        ai = aa[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == bb[j - 1] else 1
            best = dist[i - 1, j - 1] + cost
            up = dist[i - 1, j] + 1
            if up < best:
                best = up
            left = dist[i, j - 1] + 1
            if left < best:
                best = left
            dist[i, j] = best
    return dist
