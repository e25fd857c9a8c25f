"""Feature preparation and the classifier training loop."""

from dataclasses import dataclass, field

import numpy as np

from .. import dsp
from . import tensor as T
from .cnn import CnnModel
from .layers import SGD


class TrainingDiverged(Exception):
    pass


@dataclass
class Hyper:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 16
    epochs: int = 15


@dataclass
class FeatureStats:
    """Per-mel-bin standardization statistics from the train split."""
    mel_mean: np.ndarray  # (128,)
    mel_std: np.ndarray   # (128,)

    def transform(self, log_mel):
        return ((log_mel - self.mel_mean[:, None]) / self.mel_std[:, None]).astype(np.float32)


@dataclass
class FeatureCache:
    """Log-compressed mel spectrograms for every clip, plus train-split stats."""
    log_mel: dict          # clip_id -> (128, T) float32
    stats: FeatureStats
    specs: dict = field(default_factory=dict)  # clip_id -> MelSpectrogram

    def standardized(self, clip_id):
        return self.stats.transform(self.log_mel[clip_id])


def compute_features(corpus):
    log_mel = {}
    specs = {}
    for meta, wave in corpus.clips:
        spec = dsp.mel_spectrogram(wave)
        specs[meta.clip_id] = spec
        log_mel[meta.clip_id] = spec.log_power().astype(np.float32)
    train_ids = [m.clip_id for m, _ in corpus.subset("train")] or list(log_mel)
    stack = np.stack([log_mel[cid] for cid in train_ids])
    mean = stack.mean(axis=(0, 2))
    std = stack.std(axis=(0, 2))
    # Relative floor: keeps near-silent bins from blowing up standardized
    # values (and gradients) on off-distribution inputs.
    std = np.maximum(std, max(0.05 * std.max(), 1e-6))
    return FeatureCache(log_mel=log_mel, stats=FeatureStats(mean, std), specs=specs)


def class_labels(corpus, target):
    """clip_id -> integer label for the requested prediction target."""
    from ..emotions import EMOTION_TO_INDEX
    if target == "emotion":
        return {m.clip_id: EMOTION_TO_INDEX[m.emotion] for m in corpus.metas()}, 8
    if target == "speaker":
        actors = corpus.actors()
        index = {a: i for i, a in enumerate(actors)}
        return {m.clip_id: index[m.actor] for m in corpus.metas()}, len(actors)
    raise ValueError(f"unknown target: {target}")


def _batches(ids, batch_size, rng):
    order = list(ids)
    rng.shuffle(order)
    for i in range(0, len(order), batch_size):
        yield order[i:i + batch_size]


def accuracy(model, features, ids, labels, chunk=32):
    if not ids:
        return float("nan")
    hits = 0
    for i in range(0, len(ids), chunk):
        part = ids[i:i + chunk]
        x = np.stack([features.standardized(cid) for cid in part])
        pred, _, _ = model.predict_batch(x)
        truth = np.array([labels[cid] for cid in part])
        hits += int((pred == truth).sum())
    return hits / len(ids)


def train_classifier(corpus, target="emotion", hyper=None, seed=0, features=None,
                     model=None, log_fn=None):
    """Train the spectrogram CNN on a corpus split.

    Returns (model, trace, features) where trace holds one record per epoch
    with train loss and train/test accuracy.
    """
    hyper = hyper or Hyper()
    features = features or compute_features(corpus)
    labels, n_classes = class_labels(corpus, target)
    train_ids = [m.clip_id for m, _ in corpus.subset("train")]
    test_ids = [m.clip_id for m, _ in corpus.subset("test")]
    if len(train_ids) < 2 * n_classes:
        raise ValueError("need at least 2 training examples per class")

    rng = np.random.default_rng([seed, 0xC1A5])
    if model is None:
        model = CnnModel(n_classes=n_classes, rng=np.random.default_rng([seed, 0x11D]))
    opt = SGD(model.params, lr=hyper.lr, momentum=hyper.momentum)
    trace = []
    for epoch in range(hyper.epochs):
        losses = []
        for batch in _batches(train_ids, hyper.batch_size, rng):
            x = np.stack([features.standardized(cid) for cid in batch])[:, None]
            y = np.array([labels[cid] for cid in batch])
            opt.zero_grad()
            logits, _, _ = model.forward_batch(T.Tensor(x))
            loss = T.softmax_cross_entropy(logits, y)
            if not np.isfinite(loss.data):
                raise TrainingDiverged(
                    f"{target} training loss became non-finite at epoch {epoch}")
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "train_acc": accuracy(model, features, train_ids, labels),
            "test_acc": accuracy(model, features, test_ids, labels),
        }
        trace.append(record)
        if log_fn:
            log_fn(f"[{target}] epoch {epoch:3d}  loss {record['train_loss']:.4f}  "
                   f"train {record['train_acc']:.3f}  test {record['test_acc']:.3f}")
    return model, trace, features
