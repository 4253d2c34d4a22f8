#!/usr/bin/env python3
"""Side-by-side benchmark of the JIT and pure-numpy kernel flavors.

The two hot loops are the scoring-rule grid search (candidates x hips) and
the focal keypoint loss/gradient (keypoints x pixels). Both flavors must
agree numerically; this script times them and checks agreement on the fly.

Run: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from hipmetrics._kernels import (
    _HAVE_NUMBA,
    focal_terms_grad_numpy,
    focal_terms_sum_numpy,
    njit_variants,
    scoring_grid_kappa_numpy,
)


def timeit(fn, *args, repeats=5):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_focal(njit_sum, njit_grad):
    print("\nfocal loss kernel (sum + gradient)")
    print(f"{'cells':>10}  {'numpy (ms)':>11}  {'numba (ms)':>11}  {'speedup':>8}")
    rng = np.random.default_rng(0)
    for cells in (10_000, 100_000, 1_000_000):
        p = rng.uniform(1e-6, 1 - 1e-6, size=cells)
        y = (rng.random(cells) < 0.01).astype(np.int64)
        t_np_s, a = timeit(focal_terms_sum_numpy, p, y, 2.0)
        t_nb_s, b = timeit(njit_sum, p, y, 2.0)
        assert abs(a - b) < 1e-9 * max(1.0, abs(a))
        t_np_g, ga = timeit(focal_terms_grad_numpy, p, y, 2.0)
        t_nb_g, gb = timeit(njit_grad, p, y, 2.0)
        assert np.allclose(ga, gb, rtol=1e-12)
        t_np = (t_np_s + t_np_g) * 1e3
        t_nb = (t_nb_s + t_nb_g) * 1e3
        print(f"{cells:>10}  {t_np:>11.2f}  {t_nb:>11.2f}  {t_np / t_nb:>7.1f}x")


def bench_grid(njit_grid):
    print("\nscoring grid-search kernel (729 candidates x hips)")
    print(f"{'hips':>10}  {'numpy (ms)':>11}  {'numba (ms)':>11}  {'speedup':>8}")
    rng = np.random.default_rng(1)
    # the real candidate grid: 9 (ddh, borderline) pairs per angle
    pairs = [(d, b) for b in (0, 1, 2) for d in (1, 2, 3, 4) if d > b]
    combos = np.array(
        [
            (dc, dt, ds, bc, bt, bs)
            for dc, bc in pairs
            for dt, bt in pairs
            for ds, bs in pairs
        ],
        dtype=np.int64,
    )
    tables = np.zeros((combos.shape[0], 3, 3), dtype=np.int64)
    tables[:, :, 1] = combos[:, 3:6]
    tables[:, :, 2] = combos[:, 0:3]
    sum_ddh = combos[:, 0:3].sum(axis=1)
    max_total = int(sum_ddh.max())
    for hips in (2_000, 20_000, 100_000):
        class_idx = rng.integers(0, 3, size=(hips, 3)).astype(np.int64)
        labels = (rng.random(hips) < 0.3).astype(np.int64)
        t_np, a = timeit(
            scoring_grid_kappa_numpy, class_idx, labels, tables, sum_ddh, max_total, repeats=3
        )
        t_nb, b = timeit(njit_grid, class_idx, labels, tables, sum_ddh, max_total, repeats=3)
        mask = ~np.isnan(a)
        assert np.allclose(a[mask], b[mask], rtol=1e-12)
        print(f"{hips:>10}  {t_np * 1e3:>11.2f}  {t_nb * 1e3:>11.2f}  {t_np / t_nb:>7.1f}x")


def main():
    if not _HAVE_NUMBA:
        print("numba is not importable; nothing to compare")
        return
    print("warming up JIT compilation (not counted)...")
    t0 = time.perf_counter()
    njit_sum, njit_grad, njit_grid = njit_variants()
    p = np.array([0.5, 0.5])
    y = np.array([1, 0], dtype=np.int64)
    njit_sum(p, y, 2.0)
    njit_grad(p, y, 2.0)
    njit_grid(
        np.zeros((2, 3), dtype=np.int64),
        np.array([0, 1], dtype=np.int64),
        np.array([[[0, 1, 2]] * 3], dtype=np.int64),
        np.array([6], dtype=np.int64),
        6,
    )
    print(f"warmup: {time.perf_counter() - t0:.1f}s")
    bench_focal(njit_sum, njit_grad)
    bench_grid(njit_grid)


if __name__ == "__main__":
    main()
