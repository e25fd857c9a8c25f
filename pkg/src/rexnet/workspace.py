"""Checkpoint-directory layout and the multi-phase training driver.

A trained workspace contains:
    config.json          resolved run configuration (data source, seed, knobs)
    emotion_cnn.npz      base classifier + feature statistics
    speaker_cnn.npz      speaker-identification classifier
    heads.npz            final-concept and relation heads + cue SDs
    stargan.npz          conversion GAN (absent with train_gan = false)
    relation_table.json  derived ordinal cue relations
    metrics_trace.json   per-epoch traces of every phase
"""

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import Corpus, ingest_ravdess, synth_corpus
from .config import Config
from .counterfactual import (Discriminator, GanHyper, Generator, StarGanBundle,
                             train_stargan)
from .pipeline import JointAssets, JointHyper, build_assets, joint_train
from .relations import HeadsModel, RelationTable, derive_relation_table
from .tensornet.checkpoint import load_checkpoint, load_cnn, save_checkpoint, save_cnn
from .tensornet.cnn import CnnModel
from .tensornet.train import FeatureStats, Hyper, compute_features, train_classifier


def build_corpus(cfg):
    if cfg.synthetic:
        return synth_corpus(seed=cfg.seed, n_per_class=cfg.n_per_class)
    if cfg.ravdess_root:
        return ingest_ravdess(cfg.ravdess_root, seed=cfg.seed)
    raise SystemExit("no dataset: pass --synthetic or --ravdess <dir> "
                     "(or set ravdess_root in the config file)")


@dataclass
class Workspace:
    cfg: Config
    corpus: Corpus
    features: object
    emotion: CnnModel
    speaker: CnnModel
    heads: HeadsModel
    table: RelationTable
    assets: JointAssets
    gan: StarGanBundle = None


def train_all(cfg, out_dir, log_fn=print):
    """Run every training phase and write the workspace to `out_dir`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    corpus = build_corpus(cfg)
    log_fn(f"[data] {len(corpus)} clips "
           f"({len(corpus.subset('train'))} train / {len(corpus.subset('test'))} test)")
    features = compute_features(corpus)
    trace = {}

    emotion, trace["emotion"], _ = train_classifier(
        corpus, "emotion", Hyper(cfg.lr, cfg.momentum, cfg.batch_size, cfg.m0_epochs),
        seed=cfg.seed, features=features, log_fn=log_fn)
    speaker, trace["speaker"], _ = train_classifier(
        corpus, "speaker", Hyper(cfg.lr, cfg.momentum, cfg.batch_size, cfg.speaker_epochs),
        seed=cfg.seed + 1, features=features, log_fn=log_fn)

    assets = build_assets(corpus, emotion, features, cfg.salience_threshold,
                          log_fn=log_fn)
    table = derive_relation_table(corpus, cue_map=assets.cue_map)
    (out / "relation_table.json").write_text(table.to_json())

    gan = None
    if cfg.train_gan:
        gan_hyper = GanHyper(
            epochs=cfg.gan_epochs, batch_size=cfg.gan_batch_size,
            lr_g=cfg.gan_lr_g, lr_d=cfg.gan_lr_d,
            lambda_cls=cfg.lambda_cls, lambda_cyc=cfg.lambda_cyc,
            cls_ramp_epochs=cfg.gan_cls_ramp_epochs,
            max_train_clips=cfg.gan_max_clips)
        gan = train_stargan(corpus, gan_hyper, seed=cfg.seed, features=features,
                            log_fn=log_fn)
        trace["gan"] = gan.trace

    heads = HeadsModel(emb_dim=emotion.emb_dim,
                       rng=np.random.default_rng([cfg.seed, 0x4EAD]))
    heads, trace["joint"] = joint_train(
        corpus, emotion, heads, features, table, assets,
        JointHyper(cfg.joint_epochs, cfg.batch_size, cfg.joint_lr, cfg.momentum),
        seed=cfg.seed, log_fn=log_fn)

    save_cnn(out / "emotion_cnn.npz", emotion, features.stats, {"target": "emotion"})
    save_cnn(out / "speaker_cnn.npz", speaker, features.stats,
             {"target": "speaker", "actors": corpus.actors()})
    save_checkpoint(out / "heads.npz", "heads", heads.config(),
                    dict(heads.state(), cue_sd=assets.cue_sd),
                    {"salience_threshold": cfg.salience_threshold})
    if gan is not None:
        arrays = {f"g.{k}": v for k, v in gan.generator.state().items()}
        arrays.update({f"d.{k}": v for k, v in gan.discriminator.state().items()})
        arrays.update({f"m.{k}": v for k, v in gan.domain_classifier.state().items()})
        arrays["stats.mel_mean"] = gan.stats.mel_mean
        arrays["stats.mel_std"] = gan.stats.mel_std
        save_checkpoint(out / "stargan.npz", "stargan", {
            "generator": gan.generator.config(),
            "discriminator": gan.discriminator.config(),
            "domain_classifier": gan.domain_classifier.config(),
        }, arrays)

    (out / "config.json").write_text(cfg.to_json())
    (out / "metrics_trace.json").write_text(
        json.dumps(trace, indent=2, sort_keys=True))
    log_fn(f"[done] trained in {time.time() - t0:.1f}s -> {out}")
    return Workspace(cfg=cfg, corpus=corpus, features=features, emotion=emotion,
                     speaker=speaker, heads=heads, table=table, assets=assets,
                     gan=gan)


def load_workspace(out_dir, rebuild_assets=True):
    """Reload a trained workspace; the corpus is rebuilt deterministically
    from the stored configuration."""
    out = Path(out_dir)
    if not (out / "config.json").exists():
        raise SystemExit(f"{out} does not look like a trained checkpoint directory")
    cfg = Config.from_dict(json.loads((out / "config.json").read_text()))
    corpus = build_corpus(cfg)
    features = compute_features(corpus)

    emotion, stats, _ = load_cnn(out / "emotion_cnn.npz")
    features.stats = stats  # training-time statistics stay authoritative
    speaker, _, _ = load_cnn(out / "speaker_cnn.npz")

    meta, arrays = load_checkpoint(out / "heads.npz")
    cue_sd = arrays.pop("cue_sd")
    heads = HeadsModel.from_config(meta["config"])
    heads.load_state(arrays)
    table = RelationTable.from_json((out / "relation_table.json").read_text())

    gan = None
    if (out / "stargan.npz").exists():
        gmeta, garrays = load_checkpoint(out / "stargan.npz")
        gen = Generator.from_config(gmeta["config"]["generator"])
        gen.load_state({k[2:]: v for k, v in garrays.items() if k.startswith("g.")})
        dis = Discriminator.from_config(gmeta["config"]["discriminator"])
        dis.load_state({k[2:]: v for k, v in garrays.items() if k.startswith("d.")})
        dom = CnnModel.from_config(gmeta["config"]["domain_classifier"])
        dom.load_state({k[2:]: v for k, v in garrays.items() if k.startswith("m.")})
        gan = StarGanBundle(generator=gen, discriminator=dis, domain_classifier=dom,
                            stats=FeatureStats(garrays["stats.mel_mean"],
                                               garrays["stats.mel_std"]))

    assets = None
    if rebuild_assets:
        assets = build_assets(corpus, emotion, features, cfg.salience_threshold)
        assets.cue_sd = cue_sd  # standardization fixed at training time
    return Workspace(cfg=cfg, corpus=corpus, features=features, emotion=emotion,
                     speaker=speaker, heads=heads, table=table, assets=assets,
                     gan=gan)
