#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

The active pipeline backend is controlled by MOTION_LSMD_NUMBA; this
script always times both implementations directly.
"""

import time

import numpy as np

from motion_lsmd import _kernels


def _time(fn, *args, repeat=5):
    fn(*args)  # warm up (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_cd(d, n, lam=0.01, sweeps=500):
    rng = np.random.default_rng(0)
    X = np.abs(rng.standard_normal((d, n)))
    t = np.abs(rng.standard_normal(d))
    args = (X, t, lam, 1e-10, sweeps)
    rows = [("cd_nn_lasso numpy", _time(_kernels._cd_nn_lasso_numpy, *args))]
    if _kernels.NUMBA_ACTIVE:
        rows.append(("cd_nn_lasso numba", _time(_kernels._cd_nn_lasso_jit, *args)))
    return rows


def bench_gram(n, lam=0.01, sweeps=500):
    rng = np.random.default_rng(1)
    X = np.abs(rng.standard_normal((4 * n, n)))
    G = X.T @ X
    c = X.T @ np.abs(rng.standard_normal(4 * n))
    args = (G, c, 1.0, lam, 1e-10, sweeps)
    rows = [("cd_nn_lasso_gram numpy", _time(_kernels._cd_nn_lasso_gram_numpy, *args))]
    if _kernels.NUMBA_ACTIVE:
        rows.append(("cd_nn_lasso_gram numba", _time(_kernels._cd_nn_lasso_gram_jit, *args)))
    return rows


def bench_warp(size=32, batch=300):
    rng = np.random.default_rng(2)
    pixels = rng.random((128, 128))
    rows_grid = 20.0 + 80.0 * rng.random((size, size))
    cols_grid = 20.0 + 80.0 * rng.random((size, size))

    def run(fn):
        for _ in range(batch):
            fn(pixels, rows_grid, cols_grid)

    out = [("bilinear numpy x%d" % batch, _time(run, _kernels._bilinear_numpy))]
    if _kernels.NUMBA_ACTIVE:
        out.append(("bilinear numba x%d" % batch, _time(run, _kernels._bilinear_jit)))
    return out


def bench_blocks(P=16, d=64, m=10, batch=100):
    rng = np.random.default_rng(3)
    dicts = np.abs(rng.standard_normal((P, d, m)))
    dicts /= np.linalg.norm(dicts, axis=1, keepdims=True)
    grams = np.einsum("pij,pik->pjk", dicts, dicts)
    blocks = np.abs(rng.standard_normal((P, d)))

    def run(fn):
        for _ in range(batch):
            fn(grams, dicts, blocks, 0.0, 1e-10, 200)

    out = [("block_residuals numpy x%d" % batch, _time(run, _kernels._block_residuals_numpy))]
    if _kernels.NUMBA_ACTIVE:
        out.append(("block_residuals numba x%d" % batch, _time(run, _kernels._block_residuals_jit)))
    return out


def main():
    print(f"pipeline backend: {_kernels.backend_name()}")
    groups = [
        ("coordinate descent 64x160", bench_cd(64, 160)),
        ("coordinate descent 1024x10", bench_cd(1024, 10)),
        ("gram coordinate descent n=160", bench_gram(160)),
        ("bilinear warp 32x32", bench_warp()),
        ("block residuals 16x(64x10)", bench_blocks()),
    ]
    for title, rows in groups:
        print(f"\n{title}")
        base = rows[0][1]
        for name, secs in rows:
            speedup = base / secs if secs > 0 else float("inf")
            print(f"  {name:32s} {secs * 1e3:10.3f} ms   ({speedup:5.1f}x vs numpy)")


if __name__ == "__main__":
    main()
