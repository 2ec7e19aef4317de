"""Compare the compiled descriptor kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints the median time per 120x752 frame for each kernel and backend, the
speed-up, and the largest absolute difference between the two outputs.
"""
import argparse
import statistics
import time

import numpy as np

from omniplace import _fallback, kernels
from omniplace.features import DescriptorConfig, ImageFrame, _lbp_table, describe


def median_ms(fn, repeat):
    fn()  # warm caches and lookup tables
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return 1000 * statistics.median(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not kernels.compiled_available():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    from omniplace import _kernels

    rng = np.random.default_rng(args.seed)
    img = rng.integers(0, 256, (120, 752)).astype(np.uint8)
    table = _lbp_table(True)

    cases = [
        ("hog cells", lambda m: m.hog_cell_histograms(img, 16, 9)),
        ("lbp histogram", lambda m: m.lbp_histogram(img, table, 59)),
    ]
    print(f"{'kernel':16s} {'cython ms':>10s} {'numpy ms':>10s} {'speed-up':>9s} {'max |diff|':>11s}")
    for name, call in cases:
        fast = median_ms(lambda: call(_kernels), args.repeat)
        slow = median_ms(lambda: call(_fallback), args.repeat)
        diff = float(np.max(np.abs(np.asarray(call(_kernels), float) - np.asarray(call(_fallback), float))))
        print(f"{name:16s} {fast:10.3f} {slow:10.3f} {slow / fast:8.1f}x {diff:11.2e}")

    frame = ImageFrame(img, "intensity", "bench")
    full = median_ms(lambda: describe(frame, DescriptorConfig()), max(3, args.repeat // 5))
    print(f"full descriptor set per frame ({kernels.BACKEND} backend): {full:.1f} ms")


if __name__ == "__main__":
    main()
