# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the numpy kernels in `_ref`."""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def tconv2d_k4s2p1(double[:, :, ::1] x, double[:, :, :, ::1] w, double[::1] bias):
    """GEMM for the channel contraction, compiled loops for the stride-2
    scatter (which numpy does through 16 strided slice additions)."""
    cdef int c_in = <int> x.shape[0], h = <int> x.shape[1], wd = <int> x.shape[2]
    cdef int c_out = <int> w.shape[1]
    if w.shape[0] != c_in or w.shape[2] != 4 or w.shape[3] != 4:
        raise ValueError("kernel shape does not match input")
    cdef int hw = h * wd, cok = c_out * 16
    # t[co, di, dj, i*wd+j] = sum_ci x[ci, i, j] * w[ci, co, di, dj]
    t_arr = np.empty((c_out, 4, 4, hw))
    cdef double[:, :, :, ::1] t = t_arr
    cdef double one = 1.0, zero = 0.0
    # column-major view: C(hw, cok) = X(hw, c_in) * W(c_in, cok) with W
    # stored row-major (c_in, cok), hence transb='T'
    dgemm("N", "T", &hw, &cok, &c_in, &one,
          <double*> &x[0, 0, 0], &hw,
          <double*> &w[0, 0, 0, 0], &cok,
          &zero, <double*> &t[0, 0, 0, 0], &hw)

    out_arr = np.empty((c_out, 2 * h, 2 * wd))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t co, i, j, di, dj, oi, oj
    cdef double b
    for co in range(c_out):
        b = bias[co]
        for oi in range(2 * h):
            for oj in range(2 * wd):
                out[co, oi, oj] = b
        for di in range(4):
            for dj in range(4):
                for i in range(h):
                    oi = 2 * i + di - 1
                    if oi < 0 or oi >= 2 * h:
                        continue
                    for j in range(wd):
                        oj = 2 * j + dj - 1
                        if 0 <= oj < 2 * wd:
                            out[co, oi, oj] += t[co, di, dj, i * wd + j]
    return out_arr


def instance_norm2d(double[:, :, ::1] x, double eps, double[::1] gamma, double[::1] beta):
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t n = h * w
    out_arr = np.empty((c, h, w))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ci, i, j
    cdef double mean, var, diff, inv, g, b
    for ci in range(c):
        mean = 0.0
        for i in range(h):
            for j in range(w):
                mean += x[ci, i, j]
        mean /= n
        var = 0.0
        for i in range(h):
            for j in range(w):
                diff = x[ci, i, j] - mean
                var += diff * diff
        var /= n
        inv = 1.0 / ((var + eps) ** 0.5)
        g = gamma[ci]
        b = beta[ci]
        for i in range(h):
            for j in range(w):
                out[ci, i, j] = (x[ci, i, j] - mean) * inv * g + b
    return out_arr


def flow_band_matrix(double[:, ::1] ch, double[:, ::1] cv):
    cdef Py_ssize_t rows = ch.shape[0]
    cdef Py_ssize_t cols = ch.shape[1] + 1
    cdef Py_ssize_t m = cols - 2
    cdef Py_ssize_t n = rows * m
    ab_arr = np.zeros((m + 1, n))
    cdef double[:, ::1] ab = ab_arr
    cdef Py_ssize_t r, c, idx
    cdef double d
    for r in range(rows):
        for c in range(1, cols - 1):
            idx = r * m + (c - 1)
            d = ch[r, c - 1] + ch[r, c]
            if r > 0:
                d += cv[r - 1, c]
                ab[0, idx] = -cv[r - 1, c]
            if r < rows - 1:
                d += cv[r, c]
            ab[m, idx] = d
            if c > 1:
                ab[m - 1, idx] = -ch[r, c - 1]
    return ab_arr
