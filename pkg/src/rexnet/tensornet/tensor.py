"""Small reverse-mode autodiff over NumPy arrays.

Covers exactly the ops the emotion/conversion networks need: dense and conv
layers, 2x2 max pooling, pointwise nonlinearities, concatenation, nearest
upsampling with cropping, and fused classification losses. Conv and pool
work is delegated to :mod:`rexnet.kernels`.
"""

from contextlib import contextmanager

import numpy as np

from .. import kernels

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction (inference paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad=False, parents=(), bwd=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad and _grad_enabled
        self._parents = parents if self.requires_grad else ()
        self._bwd = bwd if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self):
        return Tensor(self.data)

    def _accum(self, g):
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, seed=None):
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward() without seed requires a scalar")
            seed = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accum(np.asarray(seed))
        for node in reversed(order):
            if node._bwd is not None and node.grad is not None:
                node._bwd(node.grad)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other, self.dtype)
        out = _make(self.data + other.data, (self, other))
        if out.requires_grad:
            def bwd(g):
                if self.requires_grad:
                    self._accum(_unbroadcast(g, self.shape))
                if other.requires_grad:
                    other._accum(_unbroadcast(g, other.shape))
            out._bwd = bwd
        return out

    def __mul__(self, other):
        other = _as_tensor(other, self.dtype)
        out = _make(self.data * other.data, (self, other))
        if out.requires_grad:
            def bwd(g):
                if self.requires_grad:
                    self._accum(_unbroadcast(g * other.data, self.shape))
                if other.requires_grad:
                    other._accum(_unbroadcast(g * self.data, other.shape))
            out._bwd = bwd
        return out

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-_as_tensor(other, self.dtype))

    __radd__ = __add__
    __rmul__ = __mul__

    # -- shape ops -------------------------------------------------------

    def reshape(self, *shape):
        out = _make(self.data.reshape(*shape), (self,))
        if out.requires_grad:
            out._bwd = lambda g: self._accum(g.reshape(self.shape))
        return out

    def sum(self):
        out = _make(np.asarray(self.data.sum()), (self,))
        if out.requires_grad:
            out._bwd = lambda g: self._accum(np.broadcast_to(g, self.shape))
        return out

    def mean(self):
        n = self.data.size
        out = _make(np.asarray(self.data.mean()), (self,))
        if out.requires_grad:
            out._bwd = lambda g: self._accum(np.broadcast_to(g / n, self.shape))
        return out

    # -- linear algebra ---------------------------------------------------

    def matmul(self, other):
        out = _make(self.data @ other.data, (self, other))
        if out.requires_grad:
            def bwd(g):
                if self.requires_grad:
                    self._accum(g @ other.data.T)
                if other.requires_grad:
                    other._accum(self.data.T @ g)
            out._bwd = bwd
        return out

    # -- nonlinearities ----------------------------------------------------

    def relu(self):
        mask = self.data > 0
        out = _make(self.data * mask, (self,))
        if out.requires_grad:
            out._bwd = lambda g: self._accum(g * mask)
        return out

    def abs(self):
        sgn = np.sign(self.data)
        out = _make(self.data * sgn, (self,))
        if out.requires_grad:
            out._bwd = lambda g: self._accum(g * sgn)
        return out

    def leaky_relu(self, alpha=0.2):
        slope = np.where(self.data > 0, 1.0, alpha).astype(self.data.dtype)
        out = _make(self.data * slope, (self,))
        if out.requires_grad:
            out._bwd = lambda g: self._accum(g * slope)
        return out

    def sigmoid(self):
        s = _sigmoid(self.data)
        out = _make(s, (self,))
        if out.requires_grad:
            out._bwd = lambda g: self._accum(g * s * (1.0 - s))
        return out

    def softplus(self):
        y = np.logaddexp(0.0, self.data)
        out = _make(y, (self,))
        if out.requires_grad:
            out._bwd = lambda g: self._accum(g * _sigmoid(self.data))
        return out


def _make(data, parents):
    rg = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=rg, parents=tuple(p for p in parents if p.requires_grad))


def _as_tensor(v, dtype):
    if isinstance(v, Tensor):
        return v
    return Tensor(np.asarray(v, dtype=dtype))


def _unbroadcast(g, shape):
    # Reduce a broadcasted gradient back to `shape`.
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def parameter(data):
    return Tensor(np.asarray(data), requires_grad=True)


# -- structural ops --------------------------------------------------------


def concat(tensors, axis=1):
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = _make(data, tuple(tensors))
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def bwd(g):
            for t, a, b in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    sl = [slice(None)] * g.ndim
                    sl[axis] = slice(a, b)
                    t._accum(g[tuple(sl)])
        out._bwd = bwd
    return out


def index_rows(x, idx):
    """Gather rows of a 2D tensor; backward scatter-adds."""
    idx = np.asarray(idx, dtype=np.intp)
    out = _make(x.data[idx], (x,))
    if out.requires_grad:
        def bwd(g):
            full = np.zeros(x.shape, dtype=g.dtype)
            np.add.at(full, idx, g)
            x._accum(full)
        out._bwd = bwd
    return out


def conv2d(x, w, b, stride=1, pad=0):
    y = kernels.conv2d_forward(x.data, w.data, None if b is None else b.data, stride, pad)
    parents = (x, w) if b is None else (x, w, b)
    out = _make(y, parents)
    if out.requires_grad:
        kh, kw = w.shape[2], w.shape[3]
        in_h, in_w = x.shape[2], x.shape[3]

        def bwd(g):
            g = np.ascontiguousarray(g)
            if x.requires_grad:
                x._accum(kernels.conv2d_backward_input(g, w.data, in_h, in_w, stride, pad))
            if w.requires_grad:
                gw, gb = kernels.conv2d_backward_weights(x.data, g, kh, kw, stride, pad)
                w._accum(gw)
                if b is not None and b.requires_grad:
                    b._accum(gb)
        out._bwd = bwd
    return out


def maxpool2(x):
    y, idx = kernels.maxpool2_forward(x.data)
    out = _make(y, (x,))
    if out.requires_grad:
        in_h, in_w = x.shape[2], x.shape[3]
        out._bwd = lambda g: x._accum(
            kernels.maxpool2_backward(np.ascontiguousarray(g), idx, in_h, in_w))
    return out


def upsample2x(x):
    """Nearest-neighbour 2x upsampling on (N, C, H, W)."""
    y = x.data.repeat(2, axis=2).repeat(2, axis=3)
    out = _make(y, (x,))
    if out.requires_grad:
        n, c, h, w = x.shape

        def bwd(g):
            g = g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5))
            x._accum(g)
        out._bwd = bwd
    return out


def crop2d(x, out_h, out_w):
    out = _make(np.ascontiguousarray(x.data[:, :, :out_h, :out_w]), (x,))
    if out.requires_grad:
        def bwd(g):
            full = np.zeros(x.shape, dtype=g.dtype)
            full[:, :, :out_h, :out_w] = g
            x._accum(full)
        out._bwd = bwd
    return out


# -- fused losses -----------------------------------------------------------


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels, label_smoothing=0.0):
    """Mean cross-entropy of integer `labels` under `logits` (B, C).

    With label smoothing s the target distribution is
    (1 - s) * onehot + s / C, which bounds the optimal logit gap and keeps
    the classifier's confidence (and its gradients) from saturating.
    """
    p = softmax(logits.data)
    n, c = logits.shape
    target = np.full((n, c), label_smoothing / c)
    target[np.arange(n), labels] += 1.0 - label_smoothing
    logp = np.log(np.maximum(p, 1e-12))
    out = _make(np.asarray(-(target * logp).sum(axis=1).mean()), (logits,))
    if out.requires_grad:
        out._bwd = lambda g: logits._accum((g * (p - target) / n).astype(logits.dtype))
    return out


def bce_with_logits(logits, targets):
    """Mean binary cross-entropy over sigmoid outputs, numerically stable."""
    z, t = logits.data, np.asarray(targets, dtype=logits.dtype)
    loss = np.logaddexp(0.0, z) - z * t
    out = _make(np.asarray(loss.mean()), (logits,))
    if out.requires_grad:
        n = z.size
        out._bwd = lambda g: logits._accum((g * (_sigmoid(z) - t) / n).astype(logits.dtype))
    return out


def l1_loss(a, b):
    diff = a.data - b.data
    out = _make(np.asarray(np.abs(diff).mean()), (a, b))
    if out.requires_grad:
        n = diff.size
        sgn = np.sign(diff)

        def bwd(g):
            if a.requires_grad:
                a._accum((g * sgn / n).astype(a.dtype))
            if b.requires_grad:
                b._accum((-g * sgn / n).astype(b.dtype))
        out._bwd = bwd
    return out


def huber_loss(a, b, delta=0.1):
    """Smoothed mean absolute error: quadratic within +-delta, linear
    outside. Unlike plain L1 its gradient decays near the optimum, so a
    strongly weighted reconstruction term does not freeze weaker objectives
    under a constant sign force."""
    diff = a.data - b.data
    ad = np.abs(diff)
    vals = np.where(ad <= delta, 0.5 * diff ** 2 / delta, ad - 0.5 * delta)
    out = _make(np.asarray(vals.mean()), (a, b))
    if out.requires_grad:
        n = diff.size
        grad = np.clip(diff / delta, -1.0, 1.0)

        def bwd(g):
            if a.requires_grad:
                a._accum((g * grad / n).astype(a.dtype))
            if b.requires_grad:
                b._accum((-g * grad / n).astype(b.dtype))
        out._bwd = bwd
    return out
