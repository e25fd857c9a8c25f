import json
import time
from pathlib import Path

import numpy as np
import pytest

from rexnet.audio_io import CLIP_SAMPLES, SAMPLE_RATE, synth_corpus


def pure_tone(freq_hz, amp=0.5, length=CLIP_SAMPLES):
    t = np.arange(length) / SAMPLE_RATE
    return (amp * np.sin(2 * np.pi * freq_hz * t)).astype(np.float32)


@pytest.fixture(scope="session")
def tone_250():
    return pure_tone(250.0)


@pytest.fixture(scope="session")
def tone_1k():
    return pure_tone(1000.0)


@pytest.fixture(scope="session")
def small_corpus():
    """8 clips/class: smallest size honoring >= 2 clips per (actor, emotion)."""
    return synth_corpus(seed=7, n_per_class=8)


@pytest.fixture(scope="session")
def tiny_corpus():
    return synth_corpus(seed=7, n_per_class=4)


@pytest.fixture(scope="session")
def trained_workspace(tmp_path_factory):
    """The acceptance-scale run: `rexnet train --synthetic --seed 7` with
    default configuration, executed once per session through the CLI."""
    from rexnet.cli import main
    out = tmp_path_factory.mktemp("checkpoints")
    t0 = time.time()
    rc = main(["train", "--synthetic", "--seed", "7", "--out", str(out), "--quiet"])
    wall = time.time() - t0
    assert rc == 0
    trace = json.loads((out / "metrics_trace.json").read_text())
    return {"dir": Path(out), "wall_seconds": wall, "trace": trace}
