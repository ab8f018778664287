"""Benchmark the compiled kernels against the pure NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats 5]

Times the three hot kernels on image-scale inputs and prints a table with
the compiled/pure speedup per kernel.  The pure path is always available;
the compiled column is skipped when the extension is not built.
"""

import argparse
import time

import numpy as np

from fusionkit import _kernels_py

try:
    from fusionkit import _kernels
except ImportError:
    _kernels = None


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def make_cases(rng):
    cases = []

    feats = rng.uniform(0, 255, size=(480 * 640, 5))
    mean = rng.uniform(60, 200, size=5)
    a = rng.normal(size=(5, 5))
    prec = a @ a.T + np.eye(5)
    cases.append((
        "mvn_log_density (480x640 px, d=5)",
        lambda mod: mod.mvn_log_density(feats, mean, prec, -7.5),
    ))

    mask = (rng.random((480, 640)) < 0.45).astype(np.uint8)
    cases.append((
        "label_components (480x640 mask)",
        lambda mod: mod.label_components(mask),
    ))

    # Two conv regimes: the package's desk-scale nets (small maps, few
    # channels) favor the compiled loop; wide channel counts favor the
    # BLAS-backed pure path.
    x_small = rng.normal(size=(64, 64, 3))
    w_small = rng.normal(size=(5, 5, 3, 2))
    b_small = rng.normal(size=2)
    cases.append((
        "conv2d_valid (64x64x3, 5x5x3x2)",
        lambda mod: mod.conv2d_valid(x_small, w_small, b_small, 1),
    ))

    x_wide = rng.normal(size=(128, 128, 8))
    w_wide = rng.normal(size=(5, 5, 8, 16))
    b_wide = rng.normal(size=16)
    cases.append((
        "conv2d_valid (128x128x8, 5x5x8x16)",
        lambda mod: mod.conv2d_valid(x_wide, w_wide, b_wide, 1),
    ))
    return cases


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = make_cases(rng)

    name_width = max(len(name) for name, _ in cases)
    header = f"{'kernel'.ljust(name_width)}  {'pure (ms)':>10}  {'compiled (ms)':>13}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        pure = best_time(lambda: call(_kernels_py), args.repeats)
        if _kernels is not None:
            compiled = best_time(lambda: call(_kernels), args.repeats)
            ratio = pure / compiled if compiled > 0 else float("inf")
            print(f"{name.ljust(name_width)}  {pure * 1e3:10.2f}  "
                  f"{compiled * 1e3:13.2f}  {ratio:7.1f}x")
        else:
            print(f"{name.ljust(name_width)}  {pure * 1e3:10.2f}  "
                  f"{'not built':>13}  {'-':>8}")


if __name__ == "__main__":
    main()
