"""Spectrograms and heuristic vocal-cue extraction.

The mel spectrogram (128 bins, 40 ms Hann window, 10 ms hop) feeds the
models; the cue extractor measures six prosody quantities directly from the
signal: shrillness (high-band energy fraction, cut-off 500 Hz), loudness,
mean pitch and pitch spread (modal-bin fundamental in 75-500 Hz), speaking
rate, and pause proportion.

Energy framing (25 ms window, 10 ms hop) is aligned to the spectrogram frame
grid so pause masks, word spans, and saliency masks all index the same 297
frames of a standardized clip.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio_io import CLIP_SAMPLES, SAMPLE_RATE

N_MELS = 128
WIN_SAMPLES = 640   # 0.04 s
HOP_SAMPLES = 160   # 0.01 s
ENERGY_WIN = 400    # 0.025 s
HOP_S = HOP_SAMPLES / SAMPLE_RATE
FMIN, FMAX = 0.0, 8000.0
PITCH_BAND = (75.0, 500.0)
SHRILL_CUTOFF_HZ = 500.0

SILENCE_REL_THRESHOLD = 0.05
MIN_PAUSE_S = 0.10
MIN_SALIENT_FRAMES = 5


class CueExtractionError(Exception):
    pass


@dataclass
class MelSpectrogram:
    power: np.ndarray        # (128, T), nonnegative
    mel_centers: np.ndarray  # (128,) center frequency of each bin, Hz
    frame_hop_s: float = HOP_S
    frame_window_s: float = WIN_SAMPLES / SAMPLE_RATE

    @property
    def n_frames(self):
        return self.power.shape[1]

    def log_power(self):
        return np.log1p(self.power)


@dataclass
class CueVector:
    shrillness: float
    loudness: float
    mean_pitch: float
    pitch_range: float
    speaking_rate: float
    pause_proportion: float

    def as_array(self):
        return np.array([self.shrillness, self.loudness, self.mean_pitch,
                         self.pitch_range, self.speaking_rate, self.pause_proportion])

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=4)
def _mel_filterbank(n_mels=N_MELS, n_fft=WIN_SAMPLES, sr=SAMPLE_RATE,
                    fmin=FMIN, fmax=FMAX):
    """Triangular (peak 1) mel filters; returns (filters (n_mels, bins), centers)."""
    fft_freqs = np.arange(n_fft // 2 + 1) * sr / n_fft
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    filters = np.zeros((n_mels, fft_freqs.size))
    for i in range(n_mels):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (fft_freqs - lo) / max(mid - lo, 1e-9)
        down = (hi - fft_freqs) / max(hi - mid, 1e-9)
        filters[i] = np.clip(np.minimum(up, down), 0.0, None)
    return filters, edges[1:-1].copy()


def frame_starts(n_samples=CLIP_SAMPLES):
    n_frames = (n_samples - WIN_SAMPLES) // HOP_SAMPLES + 1
    return np.arange(n_frames) * HOP_SAMPLES


def mel_spectrogram(w):
    """Standardized waveform -> MelSpectrogram (raw power; callers apply
    log1p for model input)."""
    w = np.asarray(w, dtype=np.float64)
    starts = frame_starts(w.size)
    window = np.hanning(WIN_SAMPLES)
    frames = np.stack([w[s:s + WIN_SAMPLES] for s in starts])
    spec = np.fft.rfft(frames * window, n=WIN_SAMPLES, axis=1)
    power = np.abs(spec) ** 2
    filters, centers = _mel_filterbank()
    mel = filters @ power.T
    return MelSpectrogram(power=mel, mel_centers=centers)


def energy_frames(w):
    """Per-frame RMS on the shared frame grid (25 ms window, 10 ms hop)."""
    w = np.asarray(w, dtype=np.float64)
    starts = frame_starts(w.size)
    return np.sqrt(np.stack([np.mean(w[s:s + ENERGY_WIN] ** 2) for s in starts]))


@dataclass
class PauseAnalysis:
    rms: np.ndarray          # per-frame RMS
    silent: np.ndarray       # per-frame silence flags
    first_voiced: int        # frame index, -1 when fully silent
    last_voiced: int
    pauses: list             # [(start_s, end_s)] internal pauses >= 100 ms
    t_total: float           # trimmed speech duration, s
    t_pauses: float

    @property
    def voiced_duration(self):
        return self.t_total

    def voiced_frame_mask(self):
        mask = np.zeros(self.rms.size, dtype=bool)
        if self.first_voiced >= 0:
            mask[self.first_voiced:self.last_voiced + 1] = ~self.silent[
                self.first_voiced:self.last_voiced + 1]
        return mask


def analyze_pauses(w, rel_threshold=SILENCE_REL_THRESHOLD, min_pause_s=MIN_PAUSE_S):
    rms = energy_frames(w)
    ref = np.percentile(rms, 95)
    silent = rms < rel_threshold * ref if ref > 0 else np.ones_like(rms, dtype=bool)
    voiced_idx = np.flatnonzero(~silent)
    if voiced_idx.size == 0:
        return PauseAnalysis(rms=rms, silent=silent, first_voiced=-1, last_voiced=-1,
                             pauses=[], t_total=0.0, t_pauses=0.0)
    first, last = int(voiced_idx[0]), int(voiced_idx[-1])
    min_frames = int(round(min_pause_s / HOP_S))
    pauses = []
    t_pauses = 0.0
    run_start = None
    for i in range(first, last + 1):
        if silent[i]:
            if run_start is None:
                run_start = i
        elif run_start is not None:
            if i - run_start >= min_frames:
                pauses.append((run_start * HOP_S, i * HOP_S))
                t_pauses += (i - run_start) * HOP_S
            run_start = None
    t_total = (last - first + 1) * HOP_S
    return PauseAnalysis(rms=rms, silent=silent, first_voiced=first, last_voiced=last,
                         pauses=pauses, t_total=t_total, t_pauses=t_pauses)


def detect_pauses(w):
    """Internal pauses as (start_s, end_s); leading/trailing silence excluded."""
    return analyze_pauses(w).pauses


def extract_cues(spec, w, salient_mask=None, word_count=6,
                 rel_threshold=SILENCE_REL_THRESHOLD, min_pause_s=MIN_PAUSE_S):
    """Measure the six vocal cues.

    Spectral cues (shrillness, mean pitch, pitch range) are restricted to the
    salient voiced frames when a mask is given; temporal cues (speaking rate,
    pause proportion) and loudness are whole-utterance quantities.
    """
    analysis = analyze_pauses(w, rel_threshold, min_pause_s)
    if analysis.t_total <= 0:
        raise CueExtractionError("clip has no voiced frames")
    voiced = analysis.voiced_frame_mask()
    selected = voiced
    if salient_mask is not None:
        salient_mask = np.asarray(salient_mask, dtype=bool)
        if salient_mask.size != voiced.size:
            raise ValueError("salient mask length does not match frame grid")
        combined = salient_mask & voiced
        if combined.sum() >= MIN_SALIENT_FRAMES:
            selected = combined

    power = spec.power[:, :voiced.size]
    sel_power = power[:, selected]
    total = sel_power.sum()
    hi = sel_power[spec.mel_centers > SHRILL_CUTOFF_HZ].sum()
    shrillness = float(hi / total) if total > 0 else 0.0

    w = np.asarray(w, dtype=np.float64)
    sample_mask = np.zeros(w.size, dtype=bool)
    for f in np.flatnonzero(voiced):
        s = f * HOP_SAMPLES
        sample_mask[s:s + ENERGY_WIN] = True
    loudness = float(np.abs(w[sample_mask]).mean())

    band = (spec.mel_centers >= PITCH_BAND[0]) & (spec.mel_centers <= PITCH_BAND[1])
    band_centers = spec.mel_centers[band]
    band_power = power[band][:, selected]
    f0 = []
    for j in range(band_power.shape[1]):
        col = band_power[:, j]
        if col.sum() > 0:
            f0.append(band_centers[int(col.argmax())])
    if not f0:
        raise CueExtractionError("no voiced frames with in-band pitch energy")
    f0 = np.asarray(f0)

    return CueVector(
        shrillness=shrillness,
        loudness=loudness,
        mean_pitch=float(f0.mean()),
        pitch_range=float(f0.std()),
        speaking_rate=float(word_count / analysis.t_total),
        pause_proportion=float(analysis.t_pauses / analysis.t_total),
    )


def segment_words(w, word_count, rel_threshold=SILENCE_REL_THRESHOLD,
                  min_pause_s=MIN_PAUSE_S):
    """Split the trimmed voiced region into word spans at energy valleys.

    Valleys are strict local minima of the RMS contour, picked deepest-first
    with at least 80 ms separation. When fewer than word_count - 1 valleys
    qualify, the region is divided uniformly.
    """
    if word_count < 1:
        raise ValueError("word_count must be >= 1")
    analysis = analyze_pauses(w, rel_threshold, min_pause_s)
    if analysis.t_total <= 0:
        raise CueExtractionError("cannot segment an unvoiced clip")
    first, last = analysis.first_voiced, analysis.last_voiced
    rms = analysis.rms
    if word_count == 1:
        return [(first * HOP_S, (last + 1) * HOP_S)]

    candidates = [
        i for i in range(first + 1, last)
        if rms[i] < rms[i - 1] and rms[i] <= rms[i + 1]
    ]
    candidates.sort(key=lambda i: (rms[i], i))
    min_sep = int(round(0.08 / HOP_S))
    chosen = []
    for i in candidates:
        if all(abs(i - j) >= min_sep for j in chosen):
            chosen.append(i)
            if len(chosen) == word_count - 1:
                break
    if len(chosen) == word_count - 1:
        bounds = [first] + sorted(chosen) + [last + 1]
    else:
        bounds = [first + int(round(j * (last + 1 - first) / word_count))
                  for j in range(word_count + 1)]
    return [(bounds[i] * HOP_S, bounds[i + 1] * HOP_S) for i in range(word_count)]
