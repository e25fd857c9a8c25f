import numpy as np
import pytest

from rexnet import dsp
from rexnet.audio_io import CLIP_SAMPLES, SAMPLE_RATE

from conftest import pure_tone


@pytest.fixture(scope="module")
def spec_250(tone_250_mod):
    return dsp.mel_spectrogram(tone_250_mod)


@pytest.fixture(scope="module")
def tone_250_mod():
    return pure_tone(250.0)


class TestMelSpectrogram:
    def test_shape_297(self, spec_250):
        assert spec_250.power.shape == (128, 297)
        assert np.all(spec_250.power >= 0)
        assert np.all(np.isfinite(spec_250.power))

    def test_all_zero_waveform(self):
        spec = dsp.mel_spectrogram(np.zeros(CLIP_SAMPLES, dtype=np.float32))
        assert np.all(spec.power == 0)

    def test_tone_peak_matches_dft_oracle(self, tone_250_mod, spec_250):
        # Independent oracle: a plain DFT of one interior frame locates the
        # tone; the spectrogram's modal mel bin must bracket that frequency.
        frame = tone_250_mod[160 * 100:160 * 100 + 640] * np.hanning(640)
        dft_peak_hz = np.argmax(np.abs(np.fft.rfft(frame))) * SAMPLE_RATE / 640
        col = spec_250.power[:, 100]
        center = spec_250.mel_centers[int(col.argmax())]
        assert abs(center - dft_peak_hz) < 20.0

    def test_power_scales_quadratically(self, tone_250_mod):
        base = dsp.mel_spectrogram(tone_250_mod).power.sum()
        scaled = dsp.mel_spectrogram(0.5 * tone_250_mod).power.sum()
        assert scaled == pytest.approx(0.25 * base, rel=1e-6)

    def test_log_power_retains_raw(self, spec_250):
        assert np.allclose(spec_250.log_power(), np.log1p(spec_250.power))


class TestPauses:
    def test_constructed_pause(self):
        w = np.zeros(CLIP_SAMPLES, dtype=np.float32)
        n1 = int(0.9 * SAMPLE_RATE)
        w[:n1] = pure_tone(220, 0.4, n1)
        i0 = int(2.1 * SAMPLE_RATE)
        w[i0:] = pure_tone(220, 0.4, CLIP_SAMPLES - i0)
        pauses = dsp.detect_pauses(w)
        assert len(pauses) == 1
        start, end = pauses[0]
        assert end - start == pytest.approx(1.2, abs=0.05)
        cues = dsp.extract_cues(dsp.mel_spectrogram(w), w)
        assert cues.pause_proportion == pytest.approx(0.40, abs=0.05)

    def test_continuous_tone_no_pauses(self, tone_250_mod):
        assert dsp.detect_pauses(tone_250_mod) == []
        cues = dsp.extract_cues(dsp.mel_spectrogram(tone_250_mod), tone_250_mod)
        assert cues.pause_proportion == 0.0

    def test_all_zero_clip(self):
        w = np.zeros(CLIP_SAMPLES, dtype=np.float32)
        analysis = dsp.analyze_pauses(w)
        assert analysis.voiced_duration == 0.0
        assert analysis.pauses == []
        with pytest.raises(dsp.CueExtractionError):
            dsp.extract_cues(dsp.mel_spectrogram(w), w)


class TestCues:
    def test_250hz_tone(self, tone_250_mod, spec_250):
        cues = dsp.extract_cues(spec_250, tone_250_mod)
        assert cues.shrillness < 0.05
        assert cues.mean_pitch == pytest.approx(250, abs=10)
        assert cues.pitch_range < 5
        assert cues.loudness == pytest.approx(0.5 * 2 / np.pi, rel=0.05)

    def test_1khz_tone(self, tone_1k):
        cues = dsp.extract_cues(dsp.mel_spectrogram(tone_1k), tone_1k)
        assert cues.shrillness > 0.95

    def test_speaking_rate_fixture(self):
        w = np.zeros(CLIP_SAMPLES, dtype=np.float32)
        n = int(2.4 * SAMPLE_RATE)
        w[:n] = pure_tone(200, 0.4, n)
        cues = dsp.extract_cues(dsp.mel_spectrogram(w), w, word_count=6)
        assert cues.speaking_rate == pytest.approx(2.5, abs=0.01)

    def test_all_true_mask_equals_no_mask(self, tone_250_mod, spec_250):
        no_mask = dsp.extract_cues(spec_250, tone_250_mod)
        full = dsp.extract_cues(spec_250, tone_250_mod,
                                salient_mask=np.ones(297, dtype=bool))
        assert no_mask == full

    def test_sparse_mask_falls_back(self, tone_250_mod, spec_250):
        mask = np.zeros(297, dtype=bool)
        mask[5:8] = True  # below the 5-frame minimum
        out = dsp.extract_cues(spec_250, tone_250_mod, salient_mask=mask)
        assert out == dsp.extract_cues(spec_250, tone_250_mod)

    def test_bounded_cues(self, small_corpus):
        for meta, wave in small_corpus.clips[:16]:
            c = dsp.extract_cues(dsp.mel_spectrogram(wave), wave)
            assert 0 <= c.shrillness <= 1
            assert 0 <= c.pause_proportion <= 1
            assert c.pitch_range >= 0
            assert 0 <= c.mean_pitch <= 500
            assert np.all(np.isfinite(c.as_array()))


class TestSegmentWords:
    def test_six_bursts_one_peak_each(self, small_corpus):
        meta, wave = small_corpus.clips[0]
        spans = dsp.segment_words(wave, 6)
        assert len(spans) == 6
        # Burst centers: midpoints of the high-energy runs.
        rms = dsp.energy_frames(wave)
        high = rms > 0.5 * rms.max()
        edges = np.flatnonzero(np.diff(high.astype(int)))
        runs = np.split(np.flatnonzero(high), np.flatnonzero(np.diff(np.flatnonzero(high)) > 1) + 1)
        centers = [r.mean() * dsp.HOP_S for r in runs]
        assert len(centers) == 6
        for (start_s, end_s), picked in zip(spans, [
                [c for c in centers if start_s <= c < end_s] for start_s, end_s in spans]):
            assert len(picked) == 1

    def test_flat_tone_uniform_fallback(self, tone_250_mod):
        spans = dsp.segment_words(tone_250_mod, 6)
        widths = [b - a for a, b in spans]
        assert len(spans) == 6
        assert max(widths) - min(widths) < 0.02

    def test_word_count_one(self, tone_250_mod):
        spans = dsp.segment_words(tone_250_mod, 1)
        analysis = dsp.analyze_pauses(tone_250_mod)
        assert spans == [(analysis.first_voiced * dsp.HOP_S,
                          (analysis.last_voiced + 1) * dsp.HOP_S)]

    def test_spans_partition_voiced_region(self, small_corpus):
        for meta, wave in small_corpus.clips[:8]:
            spans = dsp.segment_words(wave, 6)
            analysis = dsp.analyze_pauses(wave)
            assert spans[0][0] == pytest.approx(analysis.first_voiced * dsp.HOP_S)
            assert spans[-1][1] == pytest.approx((analysis.last_voiced + 1) * dsp.HOP_S)
            for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
                assert a1 == pytest.approx(b0)
                assert a1 > a0

    def test_unvoiced_clip_errors(self):
        with pytest.raises(dsp.CueExtractionError):
            dsp.segment_words(np.zeros(CLIP_SAMPLES, dtype=np.float32), 6)
