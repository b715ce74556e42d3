"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from asd import _fallback

try:
    from asd import _core
except ImportError:  # extension not built
    _core = None


def cases(rng):
    img = rng.random((64, 64, 3))
    rows, cols = np.divmod(np.arange(64 * 64), 64)
    x = rng.random((64 * 64 * 4, 5))
    a = rng.normal(size=(5, 5))
    inv = np.linalg.inv(a @ a.T + np.eye(5))
    mean = x.mean(axis=0)
    deg = np.sort(rng.random(200_000))[::-1].copy()
    lab = (rng.random(200_000) > 0.8).astype(np.uint8)
    return {
        "bilinear_resize 64x64x3 -> 128x128": lambda m: m.bilinear_resize(img, 128, 128),
        "gather_patches 4096 x 15x15x3": lambda m: m.gather_patches(img, rows, cols, 15),
        "mahalanobis_batch 16384 x L=5": lambda m: m.mahalanobis_batch(x, mean, inv),
        "roc_counts 200k": lambda m: m.roc_counts(deg, lab),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not available; only the fallback can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'python ms':>10s} {'compiled ms':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _core is None:
            print(f"{name:40s} {t_py:10.2f} {'-':>12s} {'-':>8s}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:40s} {t_py:10.2f} {t_c:12.2f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
