# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled depth-wise 3x3 convolution kernels.

Single-threaded on purpose: the engine's determinism contract fixes the
reduction order. Fused float32/float64 so the 64-bit gradcheck oracle can
run through the same code path.
"""

import numpy as np

cimport cython

ctypedef fused real:
    float
    double


def dwconv3x3_forward(real[:, :, :, ::1] x, real[:, :, ::1] w, bias):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    out_np = np.zeros((n, c, h, wd), dtype=np.asarray(x).dtype)
    cdef real[:, :, :, ::1] y = out_np
    cdef real[::1] bv
    cdef bint has_bias = bias is not None
    if has_bias:
        bv = bias
    cdef Py_ssize_t ni, ci, i, j, a, b, ii, jj
    cdef real acc, base
    for ni in range(n):
        for ci in range(c):
            base = bv[ci] if has_bias else <real>0
            for i in range(h):
                for j in range(wd):
                    acc = base
                    for a in range(3):
                        ii = i + a - 1
                        if ii < 0 or ii >= h:
                            continue
                        for b in range(3):
                            jj = j + b - 1
                            if jj < 0 or jj >= wd:
                                continue
                            acc += w[ci, a, b] * x[ni, ci, ii, jj]
                    y[ni, ci, i, j] = acc
    return out_np


def dwconv3x3_backward_input(real[:, :, :, ::1] grad, real[:, :, ::1] w):
    cdef Py_ssize_t n = grad.shape[0], c = grad.shape[1], h = grad.shape[2], wd = grad.shape[3]
    out_np = np.zeros((n, c, h, wd), dtype=np.asarray(grad).dtype)
    cdef real[:, :, :, ::1] gx = out_np
    cdef Py_ssize_t ni, ci, p, q, a, b, i, j
    cdef real acc
    for ni in range(n):
        for ci in range(c):
            for p in range(h):
                for q in range(wd):
                    acc = 0
                    for a in range(3):
                        i = p - a + 1
                        if i < 0 or i >= h:
                            continue
                        for b in range(3):
                            j = q - b + 1
                            if j < 0 or j >= wd:
                                continue
                            acc += w[ci, a, b] * grad[ni, ci, i, j]
                    gx[ni, ci, p, q] = acc
    return out_np


def dwconv3x3_backward_weight(real[:, :, :, ::1] grad, real[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    out_np = np.zeros((c, 3, 3), dtype=np.asarray(x).dtype)
    cdef real[:, :, ::1] gw = out_np
    cdef Py_ssize_t ni, ci, i, j, a, b, ii, jj
    cdef real g
    cdef real acc[3][3]
    for ci in range(c):
        for a in range(3):
            for b in range(3):
                acc[a][b] = 0
        # single pass over grad; the 9 tap sums accumulate in registers
        for ni in range(n):
            for i in range(h):
                for j in range(wd):
                    g = grad[ni, ci, i, j]
                    for a in range(3):
                        ii = i + a - 1
                        if ii < 0 or ii >= h:
                            continue
                        for b in range(3):
                            jj = j + b - 1
                            if jj < 0 or jj >= wd:
                                continue
                            acc[a][b] += g * x[ni, ci, ii, jj]
        for a in range(3):
            for b in range(3):
                gw[ci, a, b] = acc[a][b]
    return out_np
