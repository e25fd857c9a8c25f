"""Class activation maps from gradients of a class logit with respect to the
final conv block's activations."""

import numpy as np

from . import tensor as T


def bilinear_resize(a, out_h, out_w):
    h, w = a.shape
    if (h, w) == (out_h, out_w):
        return a.copy()
    ys = np.linspace(0, h - 1, out_h)
    xs = np.linspace(0, w - 1, out_w)
    y0 = np.floor(ys).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    fy = (ys - y0)[:, None]
    rows = a[y0] * (1 - fy) + a[y1] * fy
    x0 = np.floor(xs).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    fx = xs - x0
    return rows[:, x0] * (1 - fx) + rows[:, x1] * fx


def minmax_normalize(a):
    """Scale to [0, 1]; a constant map normalizes to all zeros."""
    lo, hi = float(a.min()), float(a.max())
    if hi - lo <= 0:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def grad_cam(model, spec_std, class_index):
    """Saliency map (H, W) in [0, 1] for one class on one standardized input."""
    x = np.asarray(spec_std, dtype=np.float32)
    logits, _, conv_act = model.forward_batch(T.Tensor(x[None, None]))
    onehot = np.zeros_like(logits.data)
    onehot[0, class_index] = 1.0
    (logits * T.Tensor(onehot)).sum().backward()
    grads = conv_act.grad[0]          # (C, h, w)
    acts = conv_act.data[0]
    model.zero_grad()
    weights = grads.mean(axis=(1, 2))
    cam = np.maximum((weights[:, None, None] * acts).sum(axis=0), 0.0)
    cam = bilinear_resize(cam, x.shape[0], x.shape[1])
    return minmax_normalize(cam)


def grad_cam_all_classes(model, spec_std):
    """(C, H, W) stack of per-class activation maps.

    Tiles the input C times and backpropagates the diagonal of the logit
    matrix, so each row's conv gradient belongs to exactly one class; one
    forward/backward pass replaces C separate ones.
    """
    x = np.asarray(spec_std, dtype=np.float32)
    c = model.n_classes
    batch = np.broadcast_to(x[None, None], (c, 1) + x.shape).copy()
    logits, _, conv_act = model.forward_batch(T.Tensor(batch))
    (logits * T.Tensor(np.eye(c, dtype=np.float32))).sum().backward()
    grads = conv_act.grad
    acts = conv_act.data
    model.zero_grad()
    weights = grads.mean(axis=(2, 3))
    cams = np.maximum((weights[:, :, None, None] * acts).sum(axis=1), 0.0)
    return np.stack([minmax_normalize(bilinear_resize(cam, x.shape[0], x.shape[1]))
                     for cam in cams])
