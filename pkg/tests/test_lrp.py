import numpy as np
import pytest

from rexnet.tensornet import lrp_attribute


class TestSingleLinear:
    def test_relevance_is_w_times_x(self):
        w = np.array([[0.5], [-1.0], [2.0]])  # (3 in, 1 out)
        x = np.array([2.0, 1.0, 0.5])
        rel = lrp_attribute([(w, None, False)], x, 0)
        np.testing.assert_allclose(rel, w[:, 0] * x, atol=1e-6)
        assert rel.sum() == pytest.approx((x @ w)[0], abs=1e-6)

    def test_zero_input_zero_relevance(self):
        w = np.random.default_rng(0).normal(size=(4, 2))
        rel = lrp_attribute([(w, None, False)], np.zeros(4), 1)
        np.testing.assert_array_equal(rel, 0.0)


class TestTwoLayer:
    def test_matches_hand_unrolled_epsilon_rule(self):
        # 3-unit layers, worked by hand with the stabilized proportional rule.
        w1 = np.array([[1.0, 0.0, 0.5],
                       [0.0, 1.0, -0.5],
                       [0.5, 0.5, 1.0]])
        w2 = np.array([[1.0, -1.0, 0.0],
                       [0.0, 1.0, 1.0],
                       [1.0, 0.0, -1.0]])
        x = np.array([1.0, 2.0, 0.5])
        eps = 1e-6
        z1 = x @ w1
        a1 = np.maximum(z1, 0)
        z2 = a1 @ w2
        out_index = 1
        r2 = np.zeros(3)
        r2[out_index] = z2[out_index]
        s2 = r2 / (z2 + eps * np.where(z2 >= 0, 1, -1))
        r1 = a1 * (w2 @ s2)
        s1 = r1 / (z1 + eps * np.where(z1 >= 0, 1, -1))
        expected = x * (w1 @ s1)
        rel = lrp_attribute([(w1, None, True), (w2, None, False)], x, out_index)
        np.testing.assert_allclose(rel, expected, atol=1e-9)

    def test_conservation_on_bias_free_heads(self):
        # Without biases the epsilon rule conserves relevance up to an
        # epsilon-proportional leak.
        rng = np.random.default_rng(5)
        for trial in range(20):
            w1 = rng.normal(size=(10, 6))
            w2 = rng.normal(size=(6, 4))
            x = rng.normal(size=10)
            k = int(rng.integers(0, 4))
            z2 = np.maximum(x @ w1, 0) @ w2
            rel = lrp_attribute([(w1, None, True), (w2, None, False)], x, k)
            logit = z2[k]
            assert abs(rel.sum() - logit) <= 1e-3 * abs(logit) + 1e-9

    def test_relu_gating_zeroes_dead_paths(self):
        w1 = np.array([[1.0, -1.0]])
        w2 = np.array([[1.0], [1.0]])
        rel = lrp_attribute([(w1, None, True), (w2, None, False)],
                            np.array([2.0]), 0)
        # hidden unit 2 is relu-dead; all relevance flows through unit 1
        assert rel[0] == pytest.approx(2.0, abs=1e-5)


def test_heads_model_lrp_layers_shapes():
    from rexnet.relations import HeadsModel
    heads = HeadsModel(rng=np.random.default_rng(0))
    layers = heads.lrp_layers_y()
    assert layers[0][0].shape == (112, 64)
    assert layers[1][0].shape == (64, 8)
    rel = lrp_attribute(layers, np.random.default_rng(1).normal(size=112), 3)
    assert rel.shape == (112,)
    assert np.all(np.isfinite(rel))
