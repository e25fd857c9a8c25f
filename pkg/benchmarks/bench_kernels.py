#!/usr/bin/env python3
"""Benchmark the compiled conv/pool kernels against the NumPy fallback.

Run:  python benchmarks/bench_kernels.py [--repeats 5]

Shapes mirror the three conv blocks of the spectrogram classifier at batch
size 16, plus the strided generator encoder. Parity is asserted before
timing.
"""

import argparse
import time

import numpy as np

from rexnet.kernels import fallback

try:
    from rexnet.kernels import _convcore as compiled
except ImportError:
    compiled = None

CASES = [
    ("conv1  1->8   128x297 s1", (16, 1, 128, 297), 8, 1),
    ("conv2  8->16  64x148  s1", (16, 8, 64, 148), 16, 1),
    ("conv3  16->32 32x74   s1", (16, 16, 32, 74), 32, 1),
    ("genenc 9->12  128x297 s2", (8, 9, 128, 297), 12, 2),
]


def timeit(fn, *args, repeats=5):
    fn(*args)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if compiled is None:
        print("compiled extension not built; only the fallback is available")
        return

    rng = np.random.default_rng(0)
    print(f"{'case':28s} {'op':8s} {'compiled':>10s} {'fallback':>10s} {'speedup':>8s}")
    for name, shape, cout, stride in CASES:
        x = rng.normal(size=shape).astype(np.float32)
        w = rng.normal(size=(cout, shape[1], 3, 3)).astype(np.float32)
        b = np.zeros(cout, dtype=np.float32)
        yc = compiled.conv2d_forward(x, w, b, stride, 1)
        yf = fallback.conv2d_forward(x, w, b, stride, 1)
        assert np.allclose(yc, yf, atol=1e-3), "forward parity failed"
        gy = rng.normal(size=yc.shape).astype(np.float32)

        ops = {
            "fwd": (lambda m: m.conv2d_forward(x, w, b, stride, 1)),
            "bwd_w": (lambda m: m.conv2d_backward_weights(x, gy, 3, 3, stride, 1)),
            "bwd_x": (lambda m: m.conv2d_backward_input(gy, w, shape[2], shape[3], stride, 1)),
        }
        for op, fn in ops.items():
            tc = timeit(fn, compiled, repeats=args.repeats)
            tf = timeit(fn, fallback, repeats=args.repeats)
            print(f"{name:28s} {op:8s} {tc * 1e3:9.1f}ms {tf * 1e3:9.1f}ms "
                  f"{tf / tc:7.2f}x")

    x = rng.normal(size=(16, 32, 64, 148)).astype(np.float32)
    tc = timeit(lambda: compiled.maxpool2_forward(x), repeats=args.repeats)
    tf = timeit(lambda: fallback.maxpool2_forward(x), repeats=args.repeats)
    print(f"{'maxpool 32ch 64x148':28s} {'fwd':8s} {tc * 1e3:9.1f}ms {tf * 1e3:9.1f}ms "
          f"{tf / tc:7.2f}x")


if __name__ == "__main__":
    main()
