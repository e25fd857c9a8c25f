import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rexnet import saliency

maps = arrays(np.float64, (8, 13), elements=st.floats(0, 1, allow_nan=False))


class TestPairwise:
    def test_worked_example(self):
        s_y = np.array([0.8, 0.2, 0.4, 1.0])
        s_g = np.array([0.5, 0.0, 1.0, 0.5])
        np.testing.assert_allclose(saliency.pairwise_contrastive(s_y, s_g),
                                   [0.40, 0.20, 0.00, 0.50], atol=1e-12)

    def test_zero_foil_is_identity(self):
        s = np.random.default_rng(0).uniform(0, 1, (16, 9))
        np.testing.assert_array_equal(saliency.pairwise_contrastive(s, np.zeros_like(s)), s)

    def test_ones_foil_is_zero(self):
        s = np.random.default_rng(1).uniform(0, 1, (16, 9))
        np.testing.assert_array_equal(saliency.pairwise_contrastive(s, np.ones_like(s)), 0 * s)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            saliency.pairwise_contrastive(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            saliency.pairwise_contrastive(np.full((2, 2), 1.5), np.zeros((2, 2)))

    @given(maps, maps)
    @settings(max_examples=50, deadline=None)
    def test_dominance(self, s_y, s_g):
        out = saliency.pairwise_contrastive(s_y, s_g)
        assert np.all(out >= 0) and np.all(out <= s_y + 1e-12)

    @given(maps)
    @settings(max_examples=25, deadline=None)
    def test_self_contrast_identity(self, s):
        np.testing.assert_allclose(saliency.pairwise_contrastive(s, s),
                                   s * (1 - s), atol=1e-12)


class TestTotal:
    def test_worked_example(self):
        s_y = np.array([[0.5]])
        out = saliency.total_contrastive(s_y, [np.array([[0.2]]), np.array([[0.6]])])
        assert out[0, 0] == pytest.approx(0.30, abs=1e-12)

    def test_zero_others_identity(self):
        s = np.random.default_rng(2).uniform(0, 1, (4, 4))
        out = saliency.total_contrastive(s, [np.zeros_like(s)] * 7)
        np.testing.assert_array_equal(out, s)

    def test_ones_others_zero(self):
        s = np.random.default_rng(3).uniform(0, 1, (4, 4))
        out = saliency.total_contrastive(s, [np.ones_like(s)] * 7)
        np.testing.assert_array_equal(out, 0 * s)

    def test_empty_others_rejected(self):
        with pytest.raises(ValueError):
            saliency.total_contrastive(np.zeros((2, 2)), [])

    @given(maps, maps)
    @settings(max_examples=25, deadline=None)
    def test_single_other_equals_pairwise(self, s_y, s_g):
        np.testing.assert_allclose(saliency.total_contrastive(s_y, [s_g]),
                                   saliency.pairwise_contrastive(s_y, s_g), atol=1e-12)

    @given(maps)
    @settings(max_examples=25, deadline=None)
    def test_dominance(self, s_y):
        rng = np.random.default_rng(4)
        others = [rng.uniform(0, 1, s_y.shape) for _ in range(7)]
        out = saliency.total_contrastive(s_y, others)
        assert np.all(out >= 0) and np.all(out <= s_y + 1e-12)


class TestTimeBar:
    def test_hand_mean(self):
        m = np.array([[0.2, 0.8], [0.4, 0.6]])
        bar = saliency.to_time_bar(m, [])
        # pre-normalization means are [0.3, 0.7] -> normalized [0, 1]
        np.testing.assert_allclose(bar.per_frame, [0.0, 1.0])

    def test_uniform_map_is_zeros(self):
        bar = saliency.to_time_bar(np.full((128, 297), 0.4), [])
        assert np.all(bar.per_frame == 0)

    def test_concentrated_word_gets_max_mean(self):
        m = np.zeros((128, 297))
        m[:, 150:170] = 1.0
        spans = [(i * 0.49, (i + 1) * 0.49) for i in range(6)]
        bar = saliency.to_time_bar(m, spans)
        means = [s[2] for s in bar.word_spans]
        assert int(np.argmax(means)) == 3  # frames 150-170 fall in span 3

    def test_bar_bounded(self):
        m = np.random.default_rng(5).uniform(0, 1, (128, 297))
        bar = saliency.to_time_bar(m, [])
        assert bar.per_frame.min() >= 0 and bar.per_frame.max() <= 1


class TestSalientMask:
    def test_threshold(self):
        m = np.tile(np.array([0.1, 0.6, 0.9]), (4, 1))
        # per-frame normalized: [0, 0.625, 1]
        mask = saliency.salient_frame_mask(m, 0.5)
        assert mask.tolist() == [False, True, True]

    def test_all_zero_fallback_marks_top_slice(self):
        mask = saliency.salient_frame_mask(np.zeros((8, 297)), 0.5)
        assert mask.sum() == max(5, int(np.ceil(0.05 * 297)))

    def test_min_frames_guarantee(self):
        m = np.zeros((4, 100))
        m[:, 10] = 1.0  # only one frame above any threshold
        mask = saliency.salient_frame_mask(m, 0.5)
        assert mask.sum() >= 5

    def test_threshold_domain(self):
        with pytest.raises(ValueError):
            saliency.salient_frame_mask(np.zeros((2, 10)), 0.0)
