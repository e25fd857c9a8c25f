import numpy as np
import pytest

from rexnet.tensornet import CnnModel, grad_cam, grad_cam_all_classes
from rexnet.tensornet.gradcam import bilinear_resize, minmax_normalize


class TestCamMath:
    def test_hand_computed_two_channel_map(self):
        # Oracle: weights = mean gradient per channel; cam = relu(sum w_k A_k),
        # evaluated by hand on a 4x4 feature map pair.
        acts = np.array([
            [[1.0, 0.0, 0.0, 0.0]] * 4,
            [[0.0, 0.5, 0.0, 0.0]] * 4,
        ])
        grads = np.array([
            [[0.2] * 4] * 4,
            [[-0.1] * 4] * 4,
        ])
        weights = grads.mean(axis=(1, 2))
        cam = np.maximum((weights[:, None, None] * acts).sum(axis=0), 0)
        expected = np.array([[0.2, -0.05, 0.0, 0.0]] * 4).clip(min=0)
        np.testing.assert_allclose(cam, expected)
        # and the normalization contract
        norm = minmax_normalize(cam)
        assert norm.min() == 0.0 and norm.max() == 1.0

    def test_constant_map_normalizes_to_zeros(self):
        assert np.all(minmax_normalize(np.full((4, 5), 3.3)) == 0)

    def test_bilinear_resize_endpoints(self):
        a = np.array([[0.0, 1.0], [2.0, 3.0]])
        out = bilinear_resize(a, 3, 3)
        assert out[0, 0] == 0.0 and out[-1, -1] == 3.0
        assert out[1, 1] == pytest.approx(1.5)


@pytest.fixture(scope="module")
def model_and_input():
    model = CnnModel(n_classes=8, rng=np.random.default_rng(11))
    spec = np.random.default_rng(12).normal(size=(128, 297)).astype(np.float32)
    return model, spec


class TestGradCam:
    def test_bounds(self, model_and_input):
        model, spec = model_and_input
        cam = grad_cam(model, spec, 3)
        assert cam.shape == (128, 297)
        assert cam.min() >= 0.0 and cam.max() <= 1.0

    def test_peak_follows_single_positive_channel(self):
        # A model whose class logit depends on one conv channel peaks where
        # that channel's activation peaks.
        model = CnnModel(n_classes=2, rng=np.random.default_rng(0))
        spec = np.zeros((128, 297), dtype=np.float32)
        spec[40:48, 100:110] = 5.0
        cam = grad_cam(model, spec, int(model.forward(spec)[0].argmax()))
        peak = np.unravel_index(cam.argmax(), cam.shape)
        assert 90 <= peak[1] <= 120  # time frames near the energy burst

    def test_argmax_invariant_to_positive_logit_scaling(self, model_and_input):
        model, spec = model_and_input
        before = grad_cam(model, spec, 2)
        model.fc2.w.data *= 3.0
        model.fc2.b.data *= 3.0
        after = grad_cam(model, spec, 2)
        model.fc2.w.data /= 3.0
        model.fc2.b.data /= 3.0
        assert np.unravel_index(before.argmax(), before.shape) == \
            np.unravel_index(after.argmax(), after.shape)
        np.testing.assert_allclose(before, after, atol=1e-5)

    def test_batched_all_classes_matches_loop(self, model_and_input):
        model, spec = model_and_input
        batched = grad_cam_all_classes(model, spec)
        looped = np.stack([grad_cam(model, spec, c) for c in range(8)])
        np.testing.assert_allclose(batched, looped, atol=1e-4)

    def test_no_gradient_residue(self, model_and_input):
        model, spec = model_and_input
        grad_cam(model, spec, 0)
        assert all(p.grad is None for p in model.params)
