"""Compare the compiled and pure-Python scanline DP backends.

Usage::

    python3 benchmarks/bench_dp.py [--lines 60] [--samples 256] [--d-max 32] [--threads 1] [--repeat 3]

Scores an all-pairs grid of random profiles with each backend, checks that
the costs agree exactly and prints the best wall time of each.
"""

import argparse
import os
import time

import numpy as np

from epiline import stereo


def best_time(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lines", type=int, default=60, help="profiles per side (default 60)")
    ap.add_argument("--samples", type=int, default=256)
    ap.add_argument("--d-max", type=int, default=32)
    ap.add_argument("--threads", type=int, default=1, help="threads for the compiled backend")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    X = rng.uniform(0, 255, (args.lines, args.samples))
    Y = rng.uniform(0, 255, (args.lines, args.samples))
    p = stereo.StereoParams(d_max=args.d_max)
    pairs = args.lines * args.lines
    print(f"{pairs} profile pairs, n={args.samples}, d_max={args.d_max}, {os.cpu_count()} CPU(s)")

    results = {}
    for name, kernel in sorted(stereo.KERNELS.items()):
        threads = args.threads if name == "compiled" else 1
        t, costs = best_time(lambda: stereo.grid_costs(X, Y, p, threads=threads, kernel=kernel), args.repeat)
        results[name] = (t, costs)
        print(f"{name:>9}: {t:8.3f} s  ({1e6 * t / pairs:8.1f} us per pair, threads={threads})")

    if len(results) == 2:
        (tc, cc), (tp, cp) = results["compiled"], results["python"]
        print(f"  speedup: {tp / tc:8.1f}x, identical costs: {np.array_equal(cc, cp)}")
    else:
        print("compiled backend not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
