# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled projection and projected-gradient kernels.

Same contracts as ``_gp_py``; rows are processed in plain C loops with
per-row early exit, which removes the per-sweep numpy dispatch overhead.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

BACKEND = "cython"


def project_rows(w, double tau):
    cdef double[:, ::1] win = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = win.shape[0], k = win.shape[1]
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double v, sq, scale
    for i in range(n):
        sq = 0.0
        for j in range(k):
            v = win[i, j]
            if v < 0.0:
                v = 0.0
            out[i, j] = v
            sq += v * v
        if tau != INFINITY and sq > tau:
            scale = sqrt(tau / sq)
            for j in range(k):
                out[i, j] *= scale
    return out_arr


def gp_rows(y0, a, b, double tau, double alpha, int max_iter, double tol):
    cdef double[:, ::1] yin = np.ascontiguousarray(y0, dtype=np.float64)
    cdef double[:, ::1] am = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bm = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = yin.shape[0], k = yin.shape[1]
    y_arr = np.array(yin, dtype=np.float64, copy=True)
    cdef double[:, ::1] y = y_arr
    cdef double[::1] w = np.empty(k, dtype=np.float64)
    cdef Py_ssize_t i, j, l, r
    cdef int sweeps = 0, row_iters
    cdef double g, v, sq, scale, disp, d
    cdef double tol_sq = tol * tol
    for i in range(n):
        row_iters = 0
        for r in range(max_iter):
            sq = 0.0
            for j in range(k):
                # gradient component: (y A)_j - b_ij  (A symmetric)
                g = 0.0
                for l in range(k):
                    g += y[i, l] * am[l, j]
                v = y[i, j] - alpha * (g - bm[i, j])
                if v < 0.0:
                    v = 0.0
                w[j] = v
                sq += v * v
            if tau != INFINITY and sq > tau:
                scale = sqrt(tau / sq)
                for j in range(k):
                    w[j] *= scale
            disp = 0.0
            for j in range(k):
                d = w[j] - y[i, j]
                disp += d * d
                y[i, j] = w[j]
            row_iters = r + 1
            if disp <= tol_sq:
                break
        if row_iters > sweeps:
            sweeps = row_iters
    return y_arr, sweeps
