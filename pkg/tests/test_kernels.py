import numpy as np
import pytest

from rexnet import kernels
from rexnet.kernels import fallback

try:
    from rexnet.kernels import _convcore as compiled
except ImportError:
    compiled = None

pytestmark = pytest.mark.skipif(compiled is None, reason="extension not built")

CASES = [
    (1, 0, (2, 3, 7, 9), 4),
    (1, 1, (2, 1, 128, 297), 8),
    (2, 1, (2, 9, 128, 297), 5),
    (2, 1, (1, 3, 15, 17), 4),
    (3, 0, (2, 2, 11, 13), 3),
]


@pytest.mark.parametrize("stride,pad,shape,cout", CASES)
def test_forward_parity(stride, pad, shape, cout):
    rng = np.random.default_rng(0)
    x = rng.normal(size=shape)
    w = rng.normal(size=(cout, shape[1], 3, 3))
    b = rng.normal(size=cout)
    a = compiled.conv2d_forward(x, w, b, stride, pad)
    c = fallback.conv2d_forward(x, w, b, stride, pad)
    np.testing.assert_allclose(a, c, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("stride,pad,shape,cout", CASES)
def test_backward_parity(stride, pad, shape, cout):
    rng = np.random.default_rng(1)
    x = rng.normal(size=shape)
    w = rng.normal(size=(cout, shape[1], 3, 3))
    gy = rng.normal(size=fallback.conv2d_forward(x, w, None, stride, pad).shape)
    gw_a, gb_a = compiled.conv2d_backward_weights(x, gy, 3, 3, stride, pad)
    gw_b, gb_b = fallback.conv2d_backward_weights(x, gy, 3, 3, stride, pad)
    np.testing.assert_allclose(gw_a, gw_b, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(gb_a, gb_b, rtol=1e-10, atol=1e-10)
    gx_a = compiled.conv2d_backward_input(gy, w, shape[2], shape[3], stride, pad)
    gx_b = fallback.conv2d_backward_input(gy, w, shape[2], shape[3], stride, pad)
    np.testing.assert_allclose(gx_a, gx_b, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("mod", [fallback] + ([compiled] if compiled else []),
                         ids=lambda m: m.BACKEND)
def test_backward_input_is_adjoint(mod):
    # <conv(x), gy> directional derivative must equal <gx, d> for the true
    # adjoint, checked with a random perturbation direction.
    rng = np.random.default_rng(2)
    for stride, pad in [(1, 1), (2, 1), (2, 0)]:
        x = rng.normal(size=(2, 3, 12, 14))
        w = rng.normal(size=(4, 3, 3, 3))
        gy = rng.normal(size=mod.conv2d_forward(x, w, None, stride, pad).shape)
        gx = mod.conv2d_backward_input(gy, w, 12, 14, stride, pad)
        d = rng.normal(size=x.shape)
        eps = 1e-6
        num = ((mod.conv2d_forward(x + eps * d, w, None, stride, pad) * gy).sum()
               - (mod.conv2d_forward(x - eps * d, w, None, stride, pad) * gy).sum()) / (2 * eps)
        assert abs(num - (gx * d).sum()) / max(abs(num), 1.0) < 1e-6


def test_maxpool_parity_and_gradient():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 3, 9, 11)).astype(np.float32)
    ya, ia = compiled.maxpool2_forward(x)
    yb, ib = fallback.maxpool2_forward(x)
    np.testing.assert_array_equal(ya, yb)
    np.testing.assert_array_equal(ia, ib)
    gy = rng.normal(size=ya.shape).astype(np.float32)
    np.testing.assert_array_equal(compiled.maxpool2_backward(gy, ia, 9, 11),
                                  fallback.maxpool2_backward(gy, ib, 9, 11))
    # odd trailing row/col dropped by pooling must get zero gradient
    gx = fallback.maxpool2_backward(gy, ib, 9, 11)
    assert np.all(gx[:, :, 8, :] == 0) and np.all(gx[:, :, :, 10] == 0)


def test_float32_and_float64_supported():
    rng = np.random.default_rng(4)
    for dtype in (np.float32, np.float64):
        x = rng.normal(size=(1, 2, 8, 8)).astype(dtype)
        w = rng.normal(size=(3, 2, 3, 3)).astype(dtype)
        y = compiled.conv2d_forward(x, w, None, 1, 1)
        assert y.dtype == dtype


def test_dispatch_prefers_compiled():
    assert kernels.BACKEND == "compiled"


def test_dispatch_env_override():
    import subprocess
    import sys
    out = subprocess.run(
        [sys.executable, "-c", "from rexnet import kernels; print(kernels.BACKEND)"],
        env={"PATH": "/usr/bin:/bin", "REXNET_KERNELS": "fallback"},
        capture_output=True, text=True)
    assert out.stdout.strip() == "fallback"
