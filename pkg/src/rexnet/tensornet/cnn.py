"""The spectrogram CNN used for emotion, speaker, and conversion-domain
classification: three conv blocks (3x3 conv, ReLU, 2x2 max pool) followed by
an embedding layer and a logit layer."""

import numpy as np

from . import tensor as T
from .layers import Conv2d, Dense


class CnnModel:
    def __init__(self, n_classes, in_shape=(128, 297), channels=(8, 16, 32),
                 emb_dim=64, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.n_classes = n_classes
        self.in_shape = tuple(in_shape)
        self.channels = tuple(channels)
        self.emb_dim = emb_dim
        c1, c2, c3 = channels
        self.conv1 = Conv2d(1, c1, rng=rng, dtype=dtype)
        self.conv2 = Conv2d(c1, c2, rng=rng, dtype=dtype)
        self.conv3 = Conv2d(c2, c3, rng=rng, dtype=dtype)
        h, w = in_shape
        for _ in range(3):
            h, w = h // 2, w // 2
        self.flat_dim = c3 * h * w
        self.fc1 = Dense(self.flat_dim, emb_dim, rng=rng, dtype=dtype)
        self.fc2 = Dense(emb_dim, n_classes, rng=rng, dtype=dtype)

    @property
    def params(self):
        layers = (self.conv1, self.conv2, self.conv3, self.fc1, self.fc2)
        return [p for layer in layers for p in layer.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def forward_batch(self, x):
        """x: Tensor (N, 1, H, W) already standardized.

        Returns (logits (N, C), embedding (N, emb_dim), last conv activation).
        """
        a = T.maxpool2(self.conv1(x).relu())
        a = T.maxpool2(self.conv2(a).relu())
        conv_act = self.conv3(a).relu()
        a = T.maxpool2(conv_act)
        flat = a.reshape(a.shape[0], self.flat_dim)
        emb = self.fc1(flat).relu()
        logits = self.fc2(emb)
        return logits, emb, conv_act

    def forward(self, spec_std):
        """Single standardized spectrogram (H, W) -> numpy outputs.

        Returns (logits (C,), embedding (emb_dim,), conv_cache (c3, h, w)).
        """
        x = np.asarray(spec_std, dtype=np.float32)
        if x.shape != self.in_shape:
            raise ValueError(f"expected input shape {self.in_shape}, got {x.shape}")
        with T.no_grad():
            logits, emb, cache = self.forward_batch(T.Tensor(x[None, None]))
        return logits.data[0], emb.data[0], cache.data[0]

    def predict_batch(self, specs_std):
        """(N, H, W) standardized spectrograms -> (argmax (N,), softmax (N, C), emb (N, D))."""
        x = np.asarray(specs_std, dtype=np.float32)[:, None]
        with T.no_grad():
            logits, emb, _ = self.forward_batch(T.Tensor(x))
        probs = T.softmax(logits.data)
        return probs.argmax(axis=1), probs, emb.data

    # -- checkpoint plumbing ------------------------------------------------

    def state(self):
        names = ("conv1", "conv2", "conv3", "fc1", "fc2")
        out = {}
        for name in names:
            layer = getattr(self, name)
            out[f"{name}.w"] = layer.w.data
            out[f"{name}.b"] = layer.b.data
        return out

    def load_state(self, state):
        for key, value in state.items():
            name, attr = key.split(".")
            param = getattr(getattr(self, name), attr)
            if param.data.shape != value.shape:
                raise ValueError(f"shape mismatch for {key}")
            param.data = value.astype(param.data.dtype)

    def config(self):
        return {
            "n_classes": self.n_classes,
            "in_shape": list(self.in_shape),
            "channels": list(self.channels),
            "emb_dim": self.emb_dim,
        }

    @classmethod
    def from_config(cls, cfg):
        return cls(n_classes=cfg["n_classes"], in_shape=tuple(cfg["in_shape"]),
                   channels=tuple(cfg["channels"]), emb_dim=cfg["emb_dim"])
