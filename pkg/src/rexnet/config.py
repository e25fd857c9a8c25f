"""Run configuration: JSON file with documented keys; CLI flags override
file values. The resolved configuration is written next to the checkpoints
so explain/evaluate reconstruct the exact same corpus and thresholds."""

import json
from dataclasses import asdict, dataclass, field, fields


@dataclass
class Config:
    seed: int = 7

    # data source: a RAVDESS-style directory, or the synthetic corpus
    ravdess_root: str = ""
    synthetic: bool = False
    n_per_class: int = 32        # synthetic clips per emotion

    # base / speaker classifier training
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 16
    m0_epochs: int = 8
    speaker_epochs: int = 6

    # joint fine-tuning of the heads
    joint_epochs: int = 6
    joint_lr: float = 0.003
    joint_cf_source: str = "samples"   # samples | synthetic

    # conversion GAN
    train_gan: bool = True
    gan_epochs: int = 20
    gan_cls_ramp_epochs: int = 8
    gan_batch_size: int = 8
    gan_lr_g: float = 0.003
    gan_lr_d: float = 0.0005
    lambda_cls: float = 1.0
    lambda_cyc: float = 10.0
    gan_max_clips: int = 96

    # signal-analysis thresholds
    salience_threshold: float = 0.5    # salient-frame cutoff on the 1D bar
    silence_rel_threshold: float = 0.05
    min_pause_s: float = 0.10

    # evaluation
    k_fraction: float = 0.2            # ablated fraction of spectrogram bins

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


def load_config(path=None, overrides=None):
    values = {}
    if path:
        with open(path) as fh:
            values.update(json.load(fh))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return Config.from_dict(values)
