"""Finite-difference verification of analytic gradients."""

import numpy as np

from . import tensor as T


def grad_check(params, loss_fn, n_samples=50, h=1e-4, rng=None):
    """Compare analytic gradients against central finite differences.

    `loss_fn` must rebuild the graph from the current parameter values and
    return a scalar Tensor. Samples at least `n_samples` entries across all
    parameters (all entries of small parameters). Returns the max relative
    error. Run with float64 parameters; float32 is too coarse for h=1e-4.
    """
    rng = rng or np.random.default_rng(0)
    params = list(params)
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for p in params]
    for p in params:
        p.grad = None

    total = sum(p.data.size for p in params)
    per_param = [max(1, round(n_samples * p.data.size / total)) for p in params]
    max_err = 0.0
    for p, grad, k in zip(params, analytic, per_param):
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        idx = rng.choice(flat.size, size=min(k, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            with T.no_grad():
                flat[i] = orig + h
                lp = float(loss_fn().data)
                flat[i] = orig - h
                lm = float(loss_fn().data)
            flat[i] = orig
            numeric = (lp - lm) / (2 * h)
            scale = max(abs(numeric), abs(gflat[i]), 1e-8)
            max_err = max(max_err, abs(numeric - gflat[i]) / scale)
    return max_err
