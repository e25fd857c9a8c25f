"""Explanation-bundle serialization.

A bundle is one JSON document per clip plus wav copies and optional
spectrogram images, all paths relative to the bundle root. Serialization is
canonical (sorted keys, floats rounded to six decimals), so
serialize -> parse -> serialize is byte-identical.
"""

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .audio_io import write_wav
from .emotions import CUE_NAMES, EMOTIONS

SCHEMA_VERSION = 1


def bundle_schema():
    text = resources.files("rexnet.schemas").joinpath(
        "explanation_bundle_v1.json").read_text()
    return json.loads(text)


def validate_bundle(doc):
    jsonschema.validate(doc, bundle_schema())
    if sum(1 for c in doc["contrasts"]) != len(EMOTIONS) - 1:
        raise jsonschema.ValidationError(
            f"expected {len(EMOTIONS) - 1} contrast entries, "
            f"got {len(doc['contrasts'])}")
    return doc


def _round(x):
    return round(float(x), 6)


def _bar(values):
    return [_round(v) for v in np.asarray(values).ravel()]


def _probmap(probs):
    return {label: _round(p) for label, p in zip(EMOTIONS, probs)}


def _cuemap(cues):
    arr = cues.as_array() if hasattr(cues, "as_array") else np.asarray(cues)
    return {name: _round(v) for name, v in zip(CUE_NAMES, arr)}


def _spans(spans):
    return [[_round(a), _round(b), _round(c)] for a, b, c in spans]


def canonical_json(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _spectrogram_png(path, log_mel):
    """Write a log spectrogram as a white-to-red heat image, low bins at the
    bottom."""
    from PIL import Image
    a = np.asarray(log_mel, dtype=np.float64)
    lo, hi = a.min(), a.max()
    norm = (a - lo) / (hi - lo) if hi > lo else np.zeros_like(a)
    norm = norm[::-1]  # frequency axis upward
    r = np.full_like(norm, 255.0)
    gb = 255.0 * (1.0 - norm)
    img = np.stack([r, gb, gb], axis=-1).astype(np.uint8)
    Image.fromarray(img, mode="RGB").save(path)


def write_bundle(record, corpus, out_dir, gan_images=True):
    """Serialize an ExplanationRecord; returns the bundle JSON path."""
    out = Path(out_dir)
    (out / "bundles").mkdir(parents=True, exist_ok=True)
    (out / "audio").mkdir(exist_ok=True)

    def ensure_audio(clip_id):
        rel = f"audio/{clip_id}.wav"
        path = out / rel
        if not path.exists():
            _, wave = corpus.get(clip_id)
            write_wav(path, wave)
        return rel

    meta = record.meta
    doc = {
        "schema_version": SCHEMA_VERSION,
        "clip": {
            "clip_id": record.clip_id,
            "audio": ensure_audio(record.clip_id),
            "actor": meta.actor,
            "emotion": meta.emotion,
            "intensity": meta.intensity,
            "statement": meta.statement,
            "repetition": meta.repetition,
            "word_count": meta.word_count,
        },
        "prediction": {
            "emotion": record.predicted,
            "probs": _probmap(record.probs_final),
            "initial_emotion": record.initial,
            "initial_probs": _probmap(record.probs_initial),
        },
        "word_spans": _spans(record.word_spans),
        "target_cues": _cuemap(record.target_cues),
        "saliency_bar": _bar(record.total_bar),
        "contrasts": [],
    }
    for entry in record.contrasts:
        if not entry.available:
            doc["contrasts"].append({
                "emotion": entry.gamma, "available": False, "reason": entry.reason,
            })
            continue
        item = {
            "emotion": entry.gamma,
            "available": True,
            "cf_clip_id": entry.cf_clip_id,
            "counterfactual_audio": ensure_audio(entry.cf_clip_id),
            "cf_cues": _cuemap(entry.cf_cues),
            "relations": {name: r for name, r in zip(CUE_NAMES, entry.relations)},
            "relation_probs": _bar(entry.relation_probs),
            "attributions": _cuemap(entry.attributions),
            "saliency_bar": _bar(entry.bar),
            "word_spans": _spans(entry.word_spans),
            "synthetic_spectrogram": None,
        }
        if gan_images and entry.synthetic_log_mel is not None:
            (out / "images").mkdir(exist_ok=True)
            rel = f"images/{record.clip_id}--{entry.gamma}.png"
            _spectrogram_png(out / rel, entry.synthetic_log_mel)
            item["synthetic_spectrogram"] = rel
        doc["contrasts"].append(item)

    validate_bundle(doc)
    path = out / "bundles" / f"{record.clip_id}.json"
    path.write_text(canonical_json(doc))
    regenerate_index(out)
    return path


def regenerate_index(out_dir):
    """Rebuild index.json from the bundle files on disk (deterministic)."""
    out = Path(out_dir)
    clips = []
    for path in sorted((out / "bundles").glob("*.json")):
        doc = json.loads(path.read_text())
        clips.append({
            "clip_id": doc["clip"]["clip_id"],
            "predicted_emotion": doc["prediction"]["emotion"],
            "bundle": f"bundles/{path.name}",
        })
    index = {"schema_version": SCHEMA_VERSION, "clips": clips}
    (out / "index.json").write_text(canonical_json(index))
    return index
