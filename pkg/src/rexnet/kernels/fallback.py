"""Pure-NumPy convolution and pooling kernels.

Used when the compiled extension is unavailable. Semantics are identical to
:mod:`rexnet.kernels._convcore`; the test suite asserts parity.

Layout conventions (shared with the compiled kernels):
  activations  (N, C, H, W)
  conv weights (Cout, Cin, kh, kw)
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "fallback"


def _out_size(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def _windows(x, kh, kw, stride):
    # (N, C, Ho, Wo, kh, kw) view over the (already padded) input
    w = sliding_window_view(x, (kh, kw), axis=(2, 3))
    return w[:, :, ::stride, ::stride]


def conv2d_forward(x, w, b, stride=1, pad=0):
    kh, kw = w.shape[2], w.shape[3]
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _windows(x, kh, kw, stride)
    y = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    if b is not None:
        y += b[None, :, None, None]
    return y


def conv2d_backward_weights(x, gy, kh, kw, stride=1, pad=0):
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _windows(x, kh, kw, stride)
    gw = np.tensordot(gy, cols, axes=([0, 2, 3], [0, 2, 3]))
    gb = gy.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(gw), gb


def conv2d_backward_input(gy, w, in_h, in_w, stride=1, pad=0):
    # Transposed-convolution formulation: dilate gy to the stride-1 grid,
    # pad, and correlate with the spatially flipped weights.
    n, cout, oh, ow = gy.shape
    kh, kw = w.shape[2], w.shape[3]
    dtype = gy.dtype
    if stride > 1:
        gyd = np.zeros((n, cout, (oh - 1) * stride + 1, (ow - 1) * stride + 1), dtype=dtype)
        gyd[:, :, ::stride, ::stride] = gy
    else:
        gyd = gy
    ph, pw = kh - 1 - pad, kw - 1 - pad
    # When the conv did not tile the input exactly, the dilated grid needs
    # extra trailing padding so the last input rows/cols line up.
    rh = (in_h + 2 * pad - kh) % stride
    rw = (in_w + 2 * pad - kw) % stride
    gyd = np.pad(gyd, ((0, 0), (0, 0), (ph, ph + rh), (pw, pw + rw)))
    wf = w[:, :, ::-1, ::-1]
    cols = _windows(gyd, kh, kw, 1)
    gx = np.tensordot(cols, wf, axes=([1, 4, 5], [0, 2, 3]))
    return np.ascontiguousarray(gx.transpose(0, 3, 1, 2))


def maxpool2_forward(x):
    # 2x2 pooling, stride 2; odd trailing rows/cols are dropped.
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    t = x[:, :, : ho * 2, : wo * 2].reshape(n, c, ho, 2, wo, 2)
    t = t.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
    idx = t.argmax(axis=4)
    y = np.take_along_axis(t, idx[..., None], axis=4)[..., 0]
    return np.ascontiguousarray(y), idx.astype(np.int64)


def maxpool2_backward(gy, idx, in_h, in_w):
    n, c, ho, wo = gy.shape
    gx4 = np.zeros((n, c, ho, wo, 4), dtype=gy.dtype)
    np.put_along_axis(gx4, idx[..., None], gy[..., None], axis=4)
    gx4 = gx4.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    gx = np.zeros((n, c, in_h, in_w), dtype=gy.dtype)
    gx[:, :, : ho * 2, : wo * 2] = gx4.reshape(n, c, ho * 2, wo * 2)
    return gx
