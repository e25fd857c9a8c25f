"""Parameter-holding layers and the SGD-with-momentum optimizer."""

import numpy as np

from . import tensor as T


def he_uniform(rng, shape, fan_in, dtype=np.float32):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2d:
    def __init__(self, cin, cout, k=3, stride=1, pad=1, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.stride, self.pad = stride, pad
        self.w = T.parameter(he_uniform(rng, (cout, cin, k, k), cin * k * k, dtype))
        self.b = T.parameter(np.zeros(cout, dtype=dtype))

    def __call__(self, x):
        return T.conv2d(x, self.w, self.b, self.stride, self.pad)

    @property
    def params(self):
        return [self.w, self.b]


class Dense:
    def __init__(self, cin, cout, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.w = T.parameter(he_uniform(rng, (cin, cout), cin, dtype))
        self.b = T.parameter(np.zeros(cout, dtype=dtype))

    def __call__(self, x):
        return x.matmul(self.w) + self.b

    @property
    def params(self):
        return [self.w, self.b]


class Adam:
    """Adam with optional global-norm clipping. Used for the adversarial
    training, where per-parameter step scaling matters; the classifiers
    stay on plain SGD."""

    def __init__(self, params, lr=0.001, beta1=0.5, beta2=0.999, eps=1e-8,
                 clip_norm=None):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.clip_norm = clip_norm
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        scale = 1.0
        if self.clip_norm is not None:
            total = np.sqrt(sum(float((p.grad ** 2).sum())
                                for p in self.params if p.grad is not None))
            if total > self.clip_norm:
                scale = self.clip_norm / total
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad * scale
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class SGD:
    """Plain mini-batch SGD with classical momentum.

    `clip_norm` rescales the global gradient norm before the update
    (adversarial training hygiene); None disables clipping.
    """

    def __init__(self, params, lr=0.01, momentum=0.9, clip_norm=None):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        scale = 1.0
        if self.clip_norm is not None:
            total = np.sqrt(sum(float((p.grad ** 2).sum())
                                for p in self.params if p.grad is not None))
            if total > self.clip_norm:
                scale = self.clip_norm / total
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            v *= self.momentum
            v -= self.lr * scale * p.grad
            p.data += v
