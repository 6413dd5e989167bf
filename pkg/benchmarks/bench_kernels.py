#!/usr/bin/env python3
"""Benchmark the numba hot kernels against the pure-numpy fallback.

Times each kernel on representative workloads (coverage counting and
interval sweeps dominate the simulation runtime) and prints the speedup.
Run from the repository root:

    python benchmarks/bench_kernels.py
    GRAINCONC_NO_NUMBA=1 python benchmarks/bench_kernels.py   # numpy-only run

Numba compilation happens outside the timed region.
"""

import argparse
import time

import numpy as np

from grainconc import _accel, _cover


def best_of(fn, args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=200_000)
    parser.add_argument("--grains", type=int, default=64)
    parser.add_argument("--intervals", type=int, default=1_000_000)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    points = rng.uniform(0.0, 10.0, size=(args.points, 2))
    centers = rng.uniform(0.0, 10.0, size=(args.grains, 2))
    radii = rng.uniform(0.5, 1.5, size=args.grains)
    halves = rng.uniform(0.25, 1.0, size=(args.grains, 2))
    starts = rng.uniform(0.0, 100.0, size=args.intervals)
    ends = starts + rng.uniform(0.0, 2.0, size=args.intervals)
    unit_pts = 2.0 * rng.random((256, 2)) - 1.0
    unit_pts = unit_pts[(unit_pts**2).sum(axis=1) <= 1.0]
    ball_centers = rng.uniform(0.0, 10.0, size=(100_000, 2))
    ball_radii = rng.uniform(0.5, 1.5, size=100_000)
    lo = np.zeros(2)
    hi = np.full(2, 10.0)

    cases = [
        ("count_cover_balls", (points, centers, radii)),
        ("count_cover_boxes", (points, centers, halves)),
        ("union_length_1d", (starts, ends, 0.0, 100.0)),
        ("once_length_1d", (starts, ends, 0.0, 100.0)),
        ("ball_box_overlaps", (ball_centers, ball_radii, unit_pts, lo, hi, np.pi)),
    ]

    print(f"numba available: {_accel.HAVE_NUMBA}   active: {_accel.NUMBA_ACTIVE}")
    header = f"{'kernel':<20} {'numpy (s)':>12} {'numba (s)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, case_args in cases:
        np_fn = getattr(_cover, f"{name}_numpy")
        t_np = best_of(np_fn, case_args)
        if _accel.HAVE_NUMBA:
            nb_fn = getattr(_cover, f"{name}_numba")
            nb_fn(*case_args)  # compile outside the timing
            t_nb = best_of(nb_fn, case_args)
            print(f"{name:<20} {t_np:>12.4f} {t_nb:>12.4f} {t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<20} {t_np:>12.4f} {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
