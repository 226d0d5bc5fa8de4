# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused kernels: masked softmax and layer norm, forward and backward.

Same signatures and semantics as ``_kernels_py``.
"""

import numpy as np
from libc.math cimport INFINITY, sqrt

cdef double MASK_FILL = -1e9
cdef double NEG_INF = -INFINITY


def masked_softmax(const double[:, :, :, ::1] scores, const unsigned char[:, :, ::1] allow):
    cdef Py_ssize_t B = scores.shape[0], H = scores.shape[1]
    cdef Py_ssize_t N = scores.shape[2], M = scores.shape[3]
    out_arr = np.empty((B, H, N, M), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, h, i, j
    cdef double mx, total, inv
    cdef double* row
    cdef const double* src
    cdef const unsigned char* keep
    # pass 1: shift by the row max over kept entries, -inf elsewhere
    with nogil:
        for b in range(B):
            for h in range(H):
                for i in range(N):
                    row = &out[b, h, i, 0]
                    src = &scores[b, h, i, 0]
                    keep = &allow[b, i, 0]
                    mx = MASK_FILL
                    for j in range(M):
                        if keep[j] and src[j] > mx:
                            mx = src[j]
                    for j in range(M):
                        row[j] = src[j] - mx if keep[j] else NEG_INF
    # numpy's vectorized exp is several times faster than libm's scalar one;
    # exp(-inf) is exactly 0
    np.exp(out_arr, out=out_arr)
    with nogil:
        for b in range(B):
            for h in range(H):
                for i in range(N):
                    row = &out[b, h, i, 0]
                    total = 0.0
                    for j in range(M):
                        total = total + row[j]
                    inv = 1.0 / total
                    for j in range(M):
                        row[j] = row[j] * inv
    return out_arr


def masked_softmax_backward(const double[:, :, :, ::1] probs, const double[:, :, :, ::1] grad):
    cdef Py_ssize_t B = probs.shape[0], H = probs.shape[1]
    cdef Py_ssize_t N = probs.shape[2], M = probs.shape[3]
    out_arr = np.empty((B, H, N, M), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, h, i, j
    cdef double inner
    with nogil:
        for b in range(B):
            for h in range(H):
                for i in range(N):
                    inner = 0.0
                    for j in range(M):
                        inner = inner + grad[b, h, i, j] * probs[b, h, i, j]
                    for j in range(M):
                        out[b, h, i, j] = probs[b, h, i, j] * (grad[b, h, i, j] - inner)
    return out_arr


def layer_norm(const double[:, ::1] x, const double[::1] gain, const double[::1] bias, double eps):
    cdef Py_ssize_t R = x.shape[0], D = x.shape[1]
    y_arr = np.empty((R, D), dtype=np.float64)
    xhat_arr = np.empty((R, D), dtype=np.float64)
    rstd_arr = np.empty(R, dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] xhat = xhat_arr
    cdef double[::1] rstd = rstd_arr
    cdef Py_ssize_t r, c
    cdef double mean, var, diff, inv
    with nogil:
        for r in range(R):
            mean = 0.0
            for c in range(D):
                mean = mean + x[r, c]
            mean = mean / D
            var = 0.0
            for c in range(D):
                diff = x[r, c] - mean
                var = var + diff * diff
            var = var / D
            inv = 1.0 / sqrt(var + eps)
            rstd[r] = inv
            for c in range(D):
                xhat[r, c] = (x[r, c] - mean) * inv
                y[r, c] = xhat[r, c] * gain[c] + bias[c]
    return y_arr, xhat_arr, rstd_arr


def layer_norm_backward(const double[:, ::1] dy, const double[:, ::1] xhat,
                        const double[::1] rstd, const double[::1] gain):
    cdef Py_ssize_t R = dy.shape[0], D = dy.shape[1]
    dx_arr = np.empty((R, D), dtype=np.float64)
    dgain_arr = np.zeros(D, dtype=np.float64)
    dbias_arr = np.zeros(D, dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef double[::1] dgain = dgain_arr
    cdef double[::1] dbias = dbias_arr
    cdef Py_ssize_t r, c
    cdef double g, mean_g, mean_gx
    with nogil:
        for r in range(R):
            mean_g = 0.0
            mean_gx = 0.0
            for c in range(D):
                g = dy[r, c] * gain[c]
                mean_g = mean_g + g
                mean_gx = mean_gx + g * xhat[r, c]
                dgain[c] = dgain[c] + dy[r, c] * xhat[r, c]
                dbias[c] = dbias[c] + dy[r, c]
            mean_g = mean_g / D
            mean_gx = mean_gx / D
            for c in range(D):
                dx[r, c] = (dy[r, c] * gain[c] - mean_g - xhat[r, c] * mean_gx) * rstd[r]
    return dx_arr, dgain_arr, dbias_arr
