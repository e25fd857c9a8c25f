"""Contrastive saliency.

A class activation map for the predicted class is discounted, pixel by
pixel, by the activation attributable to contrast classes: pairwise against
one foil, or totally against the mean of all alternatives. The 2D result is
kept raw (no renormalization); only the 1D time bar used for display is
min-max normalized.
"""

from dataclasses import dataclass

import numpy as np

from .tensornet.gradcam import minmax_normalize

DEFAULT_SALIENCE_THRESHOLD = 0.5
MIN_SALIENT_FRAMES = 5


@dataclass
class SaliencyBar:
    per_frame: np.ndarray  # (T,) in [0, 1]
    word_spans: list       # [(start_s, end_s, mean_saliency)]


def _check_map(s):
    s = np.asarray(s, dtype=np.float64)
    if s.min() < -1e-9 or s.max() > 1 + 1e-9:
        raise ValueError("saliency maps must lie in [0, 1]")
    return np.clip(s, 0.0, 1.0)


def pairwise_contrastive(s_y, s_gamma):
    """Discount the target map by the foil map: (1 - s_gamma) * s_y."""
    s_y = _check_map(s_y)
    s_gamma = _check_map(s_gamma)
    if s_y.shape != s_gamma.shape:
        raise ValueError("saliency map shapes differ")
    return (1.0 - s_gamma) * s_y


def total_contrastive(s_y, others):
    """Discount by the mean complement of all alternative-class maps."""
    if len(others) == 0:
        raise ValueError("need at least one alternative-class map")
    s_y = _check_map(s_y)
    lam = np.mean([1.0 - _check_map(s) for s in others], axis=0)
    if lam.shape != s_y.shape:
        raise ValueError("saliency map shapes differ")
    return lam * s_y


def to_time_bar(sal_map, spans, hop_s=0.01):
    """Aggregate a saliency map across frequency into a per-frame bar and
    attach per-word-span means. Bar is min-max normalized (constant maps
    collapse to zeros)."""
    sal_map = np.asarray(sal_map, dtype=np.float64)
    per_frame = minmax_normalize(sal_map.mean(axis=0))
    annotated = []
    for start_s, end_s in spans:
        a = int(round(start_s / hop_s))
        b = max(int(round(end_s / hop_s)), a + 1)
        annotated.append((float(start_s), float(end_s),
                          float(per_frame[a:min(b, per_frame.size)].mean())))
    return SaliencyBar(per_frame=per_frame, word_spans=annotated)


def salient_frame_mask(sal_map, threshold=DEFAULT_SALIENCE_THRESHOLD):
    """Frames whose frequency-mean saliency reaches `threshold` (after bar
    normalization). Guarantees at least 5 marked frames by falling back to
    the 95th-percentile level when the threshold marks fewer."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    sal_map = np.asarray(sal_map, dtype=np.float64)
    per_frame = minmax_normalize(sal_map.mean(axis=0))
    mask = per_frame >= threshold
    if mask.sum() < MIN_SALIENT_FRAMES:
        k = max(MIN_SALIENT_FRAMES, int(np.ceil(0.05 * per_frame.size)))
        mask = np.zeros(per_frame.size, dtype=bool)
        mask[np.argsort(-per_frame, kind="stable")[:k]] = True
    return mask
