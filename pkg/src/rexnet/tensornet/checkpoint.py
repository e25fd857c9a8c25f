"""Checkpoint container: one .npz per model holding the parameter arrays plus
a JSON metadata record (format version, architecture config, normalization
statistics and other extras)."""

import json

import numpy as np

from .cnn import CnnModel
from .train import FeatureStats

FORMAT_VERSION = 1


def save_checkpoint(path, kind, config, arrays, extras=None):
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "extras": extras or {},
    }
    np.savez(path, __meta__=np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version in {path}")
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    return meta, arrays


def save_cnn(path, model, stats, extras=None):
    arrays = dict(model.state())
    arrays["stats.mel_mean"] = stats.mel_mean
    arrays["stats.mel_std"] = stats.mel_std
    save_checkpoint(path, "cnn", model.config(), arrays, extras)


def load_cnn(path):
    meta, arrays = load_checkpoint(path)
    if meta["kind"] != "cnn":
        raise ValueError(f"expected cnn checkpoint, got {meta['kind']}")
    stats = FeatureStats(arrays.pop("stats.mel_mean"), arrays.pop("stats.mel_std"))
    model = CnnModel.from_config(meta["config"])
    model.load_state(arrays)
    return model, stats, meta["extras"]
