"""Ordinal cue relations between emotion pairs.

Ground truth comes from the corpus: cue values are centered per actor (a
fixed-effect approximation of an actor random effect), then each emotion
pair is compared per cue with a Welch t-test, Bonferroni-corrected over the
28 unordered pairs at family alpha .005. The relation heads predict these
relations per contrast pair from weighted cue differences and embeddings,
with the three ordinal classes encoded as cumulative bits.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import dsp
from .emotions import CUE_NAMES, EMOTIONS, RELATIONS
from .tensornet import tensor as T
from .tensornet.layers import Dense

log = logging.getLogger(__name__)

FAMILY_ALPHA = 0.005
N_PAIRS = len(EMOTIONS) * (len(EMOTIONS) - 1) // 2  # 28

_REL_CODE = {name: i for i, name in enumerate(RELATIONS)}


# -- ordinal encoding --------------------------------------------------------

def nnrank_encode(relation):
    """lower -> (0,0), similar -> (1,0), higher -> (1,1)."""
    try:
        code = _REL_CODE[relation]
    except KeyError:
        raise ValueError(f"unknown relation: {relation}") from None
    return (1 if code >= 1 else 0, 1 if code >= 2 else 0)


def nnrank_decode(probs, threshold=0.5):
    """Count consecutive above-threshold bits from the first position."""
    ones = 0
    for p in probs:
        if p < threshold:
            break
        ones += 1
    return RELATIONS[ones]


# -- the relation table -------------------------------------------------------

@dataclass
class RelationTable:
    codes: np.ndarray  # (8, 8, 6) int8, indexed [target][contrast][cue]

    def relation(self, target, contrast, cue):
        ti = EMOTIONS.index(target) if isinstance(target, str) else target
        ci = EMOTIONS.index(contrast) if isinstance(contrast, str) else contrast
        ki = CUE_NAMES.index(cue) if isinstance(cue, str) else cue
        return RELATIONS[self.codes[ti, ci, ki]]

    def relations_for(self, target, contrast):
        ti = EMOTIONS.index(target) if isinstance(target, str) else target
        ci = EMOTIONS.index(contrast) if isinstance(contrast, str) else contrast
        return [RELATIONS[c] for c in self.codes[ti, ci]]

    def validate(self):
        n = len(EMOTIONS)
        for t in range(n):
            if not np.all(self.codes[t, t] == _REL_CODE["similar"]):
                raise ValueError("diagonal must be all-similar")
            for c in range(n):
                if not np.all(self.codes[t, c] + self.codes[c, t] == 2):
                    raise ValueError("relation table is not antisymmetric")
        return self

    def to_json(self):
        return json.dumps({
            "emotions": list(EMOTIONS),
            "cues": list(CUE_NAMES),
            "relations": [[[RELATIONS[c] for c in cell] for cell in row]
                          for row in self.codes],
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc["emotions"] != list(EMOTIONS) or doc["cues"] != list(CUE_NAMES):
            raise ValueError("relation table label sets do not match")
        codes = np.array([[[_REL_CODE[r] for r in cell] for cell in row]
                          for row in doc["relations"]], dtype=np.int8)
        return cls(codes=codes).validate()


def corpus_cue_map(corpus, salient_masks=None):
    """clip_id -> CueVector for every clip (optionally saliency-masked)."""
    out = {}
    for meta, wave in corpus.clips:
        mask = salient_masks.get(meta.clip_id) if salient_masks else None
        spec = dsp.mel_spectrogram(wave)
        out[meta.clip_id] = dsp.extract_cues(spec, wave, salient_mask=mask,
                                             word_count=meta.word_count)
    return out


def derive_relation_table(corpus, cue_map=None, alpha=FAMILY_ALPHA, split="train"):
    """Derive the 8x8x6 relation table from measured cue values.

    Exactly antisymmetric by construction: each unordered emotion pair is
    tested once and mirrored. Cells without enough data default to similar.
    """
    clips = corpus.subset(split) or corpus.clips
    metas = [m for m, _ in clips]
    if len({m.actor for m in metas}) < 3:
        log.warning("fewer than 3 actors; actor centering will be weak")
    if cue_map is None:
        cue_map = corpus_cue_map(corpus)

    values = np.stack([cue_map[m.clip_id].as_array() for m in metas])
    actors = np.array([m.actor for m in metas])
    emos = np.array([EMOTIONS.index(m.emotion) for m in metas])
    centered = values.copy()
    for a in np.unique(actors):
        sel = actors == a
        centered[sel] -= values[sel].mean(axis=0)

    per_test_alpha = alpha / N_PAIRS
    sim = _REL_CODE["similar"]
    codes = np.full((8, 8, 6), sim, dtype=np.int8)
    for a in range(8):
        for b in range(a + 1, 8):
            va, vb = centered[emos == a], centered[emos == b]
            if len(va) < 2 or len(vb) < 2:
                log.warning("not enough clips to compare %s vs %s; using similar",
                            EMOTIONS[a], EMOTIONS[b])
                continue
            for k in range(6):
                res = sps.ttest_ind(va[:, k], vb[:, k], equal_var=False)
                p = res.pvalue
                if not np.isfinite(p) or p >= per_test_alpha:
                    continue
                if va[:, k].mean() > vb[:, k].mean():
                    codes[a, b, k] = _REL_CODE["higher"]
                    codes[b, a, k] = _REL_CODE["lower"]
                else:
                    codes[a, b, k] = _REL_CODE["lower"]
                    codes[b, a, k] = _REL_CODE["higher"]
    return RelationTable(codes=codes).validate()


# -- cue differences ----------------------------------------------------------

def compute_cue_sd(cue_vectors):
    """Per-cue standard deviation used to standardize differences."""
    arr = np.stack([c.as_array() for c in cue_vectors])
    return np.maximum(arr.std(axis=0), 1e-9)


def cue_differences(c_target, c_contrast, cue_sd):
    """(target - contrast) per cue, standardized by the train-split SD."""
    return (c_target.as_array() - c_contrast.as_array()) / np.asarray(cue_sd)


def weighted_cue_diffs(c_diff, attributions):
    """Concatenate the 6 standardized differences with their 6 relevance
    scores into the 12-wide relation-head input."""
    c_diff = np.asarray(c_diff, dtype=np.float64).reshape(6)
    attributions = np.asarray(attributions, dtype=np.float64).reshape(6)
    return np.concatenate([c_diff, attributions])


def relation_bits(relations):
    """6 relations -> 12 cumulative-bit targets, cue-major order."""
    bits = []
    for r in relations:
        bits.extend(nnrank_encode(r))
    return np.array(bits, dtype=np.float64)


def decode_relation_bits(probs):
    """12 sigmoid outputs -> 6 relations."""
    probs = np.asarray(probs).reshape(6, 2)
    return [nnrank_decode(p) for p in probs]


# -- multi-task heads ---------------------------------------------------------

N_SLOTS = len(EMOTIONS) * len(CUE_NAMES)  # 48


class HeadsModel:
    """Final-concept head (slot cue differences + target embedding -> emotion
    logits) and relation head (weighted cue differences + both embeddings ->
    12 ordinal bits)."""

    def __init__(self, emb_dim=64, hidden=64, rng=None):
        rng = rng or np.random.default_rng(0)
        self.emb_dim = emb_dim
        self.hidden = hidden
        self.y1 = Dense(N_SLOTS + emb_dim, hidden, rng=rng)
        self.y2 = Dense(hidden, len(EMOTIONS), rng=rng)
        self.r1 = Dense(12 + 2 * emb_dim, hidden, rng=rng)
        self.r2 = Dense(hidden, 12, rng=rng)

    @property
    def params(self):
        return [*self.y1.params, *self.y2.params, *self.r1.params, *self.r2.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def forward_y(self, x):
        """x: Tensor (B, 48 + emb_dim) -> emotion logits (B, 8)."""
        return self.y2(self.y1(x).relu())

    def forward_r(self, x):
        """x: Tensor (B, 12 + 2*emb_dim) -> relation bit logits (B, 12)."""
        return self.r2(self.r1(x).relu())

    def predict_y(self, x_np):
        with T.no_grad():
            logits = self.forward_y(T.Tensor(np.asarray(x_np, dtype=np.float32)))
        return logits.data

    def predict_r_probs(self, x_np):
        with T.no_grad():
            logits = self.forward_r(T.Tensor(np.asarray(x_np, dtype=np.float32)))
        return T._sigmoid(logits.data)

    def lrp_layers_y(self):
        """Dense stack of the final-concept head for relevance attribution."""
        return [
            (self.y1.w.data.astype(np.float64), self.y1.b.data.astype(np.float64), True),
            (self.y2.w.data.astype(np.float64), self.y2.b.data.astype(np.float64), False),
        ]

    # -- checkpoint plumbing --------------------------------------------------

    def state(self):
        out = {}
        for name in ("y1", "y2", "r1", "r2"):
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
        return {"emb_dim": self.emb_dim, "hidden": self.hidden}

    @classmethod
    def from_config(cls, cfg):
        return cls(emb_dim=cfg["emb_dim"], hidden=cfg["hidden"])
