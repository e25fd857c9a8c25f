# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled conv/pool kernels.

C loops handle the data movement (im2col, col2im, pooling); BLAS via numpy
matmul handles the arithmetic. Columns are packed per sample as (K, Ho*Wo)
so every GEMM writes straight into the (N, C, H, W) activation layout with
no transposed copies. Single-threaded and deterministic.
"""

import numpy as np

cimport cython

ctypedef fused floating:
    float
    double

BACKEND = "compiled"


cdef void _im2col_t(floating[:, :, ::1] xp, floating[:, ::1] colsT,
                    Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride,
                    Py_ssize_t oh, Py_ssize_t ow) noexcept nogil:
    # colsT: (C*kh*kw, oh*ow) for one sample
    cdef Py_ssize_t ci, i, j, r, c, krow
    cdef Py_ssize_t C = xp.shape[0]
    for ci in range(C):
        for i in range(kh):
            for j in range(kw):
                krow = (ci * kh + i) * kw + j
                for r in range(oh):
                    for c in range(ow):
                        colsT[krow, r * ow + c] = xp[ci, r * stride + i, c * stride + j]


cdef void _col2im_t(floating[:, ::1] colsT, floating[:, :, ::1] xp,
                    Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride,
                    Py_ssize_t oh, Py_ssize_t ow) noexcept nogil:
    cdef Py_ssize_t ci, i, j, r, c, krow
    cdef Py_ssize_t C = xp.shape[0]
    for ci in range(C):
        for i in range(kh):
            for j in range(kw):
                krow = (ci * kh + i) * kw + j
                for r in range(oh):
                    for c in range(ow):
                        xp[ci, r * stride + i, c * stride + j] += colsT[krow, r * ow + c]


def _pad(x, Py_ssize_t pad):
    if pad == 0:
        return np.ascontiguousarray(x)
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_forward(x, w, b, Py_ssize_t stride=1, Py_ssize_t pad=0):
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    xp = _pad(x, pad)
    cdef Py_ssize_t N = xp.shape[0], C = xp.shape[1], H = xp.shape[2], W = xp.shape[3]
    cdef Py_ssize_t oh = (H - kh) // stride + 1, ow = (W - kw) // stride + 1
    cdef Py_ssize_t co = w.shape[0], n
    wmat = np.ascontiguousarray(w.reshape(co, -1))
    colsT = np.empty((C * kh * kw, oh * ow), dtype=x.dtype)
    y = np.empty((N, co, oh, ow), dtype=x.dtype)
    ymat = y.reshape(N, co, oh * ow)
    f32 = x.dtype == np.float32
    for n in range(N):
        if f32:
            _im2col_t[float](xp[n], colsT, kh, kw, stride, oh, ow)
        else:
            _im2col_t[double](xp[n], colsT, kh, kw, stride, oh, ow)
        np.matmul(wmat, colsT, out=ymat[n])
    if b is not None:
        y += b[None, :, None, None]
    return y


def conv2d_backward_weights(x, gy, Py_ssize_t kh, Py_ssize_t kw,
                            Py_ssize_t stride=1, Py_ssize_t pad=0):
    xp = _pad(x, pad)
    cdef Py_ssize_t N = xp.shape[0], C = xp.shape[1]
    cdef Py_ssize_t oh = gy.shape[2], ow = gy.shape[3]
    cdef Py_ssize_t co = gy.shape[1], n
    gy = np.ascontiguousarray(gy)
    gymat = gy.reshape(N, co, oh * ow)
    colsT = np.empty((C * kh * kw, oh * ow), dtype=x.dtype)
    gw = np.zeros((co, C * kh * kw), dtype=x.dtype)
    f32 = x.dtype == np.float32
    for n in range(N):
        if f32:
            _im2col_t[float](xp[n], colsT, kh, kw, stride, oh, ow)
        else:
            _im2col_t[double](xp[n], colsT, kh, kw, stride, oh, ow)
        gw += gymat[n] @ colsT.T
    gb = gy.sum(axis=(0, 2, 3))
    return gw.reshape(co, C, kh, kw), gb


def conv2d_backward_input(gy, w, Py_ssize_t in_h, Py_ssize_t in_w,
                          Py_ssize_t stride=1, Py_ssize_t pad=0):
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t N = gy.shape[0], Cin = w.shape[1], co = w.shape[0]
    cdef Py_ssize_t oh = gy.shape[2], ow = gy.shape[3], n
    gy = np.ascontiguousarray(gy)
    gymat = gy.reshape(N, co, oh * ow)
    wmatT = np.ascontiguousarray(w.reshape(co, -1).T)
    gxp = np.zeros((N, Cin, in_h + 2 * pad, in_w + 2 * pad), dtype=gy.dtype)
    gcolsT = np.empty((Cin * kh * kw, oh * ow), dtype=gy.dtype)
    f32 = gy.dtype == np.float32
    for n in range(N):
        np.matmul(wmatT, gymat[n], out=gcolsT)
        if f32:
            _col2im_t[float](gcolsT, gxp[n], kh, kw, stride, oh, ow)
        else:
            _col2im_t[double](gcolsT, gxp[n], kh, kw, stride, oh, ow)
    if pad:
        gxp = np.ascontiguousarray(gxp[:, :, pad:-pad, pad:-pad])
    return gxp


cdef void _pool_fwd(floating[:, :, :, ::1] x, floating[:, :, :, ::1] y,
                    long long[:, :, :, ::1] idx) noexcept nogil:
    cdef Py_ssize_t n, c, r, col, dr, dc, best
    cdef floating v, m
    cdef Py_ssize_t N = y.shape[0], C = y.shape[1], OH = y.shape[2], OW = y.shape[3]
    for n in range(N):
        for c in range(C):
            for r in range(OH):
                for col in range(OW):
                    m = x[n, c, 2 * r, 2 * col]
                    best = 0
                    for dr in range(2):
                        for dc in range(2):
                            v = x[n, c, 2 * r + dr, 2 * col + dc]
                            if v > m:
                                m = v
                                best = 2 * dr + dc
                    y[n, c, r, col] = m
                    idx[n, c, r, col] = best


def maxpool2_forward(x):
    x = np.ascontiguousarray(x)
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t oh = H // 2, ow = W // 2
    y = np.empty((N, C, oh, ow), dtype=x.dtype)
    idx = np.empty((N, C, oh, ow), dtype=np.int64)
    if x.dtype == np.float32:
        _pool_fwd[float](x, y, idx)
    else:
        _pool_fwd[double](x, y, idx)
    return y, idx


cdef void _pool_bwd(floating[:, :, :, ::1] gy, long long[:, :, :, ::1] idx,
                    floating[:, :, :, ::1] gx) noexcept nogil:
    cdef Py_ssize_t n, c, r, col, k
    cdef Py_ssize_t N = gy.shape[0], C = gy.shape[1], OH = gy.shape[2], OW = gy.shape[3]
    for n in range(N):
        for c in range(C):
            for r in range(OH):
                for col in range(OW):
                    k = idx[n, c, r, col]
                    gx[n, c, 2 * r + k // 2, 2 * col + k % 2] = gy[n, c, r, col]


def maxpool2_backward(gy, idx, Py_ssize_t in_h, Py_ssize_t in_w):
    gy = np.ascontiguousarray(gy)
    gx = np.zeros((gy.shape[0], gy.shape[1], in_h, in_w), dtype=gy.dtype)
    if gy.dtype == np.float32:
        _pool_bwd[float](gy, idx, gx)
    else:
        _pool_bwd[double](gy, idx, gx)
    return gx
