"""Benchmark the compiled component-labeling kernel against the NumPy fallback.

The threshold sweep labels one boolean mask per (image, gamma) pair, so the
kernel dominates dataset evaluation at pixel resolution. This script times
both backends on the same masks, checks they return identical results, and
prints a table.

Run from the repository root:  python3 benchmarks/bench_ccl.py
"""

import time

import numpy as np

from scmap._kernels import ccl_py

try:
    from scmap._kernels import _ccl
except ImportError:
    _ccl = None

SIZES = ((14, 14), (56, 56), (224, 224), (448, 448))
REPEATS = 7


def blobby_mask(rng, h, w, gamma):
    """Threshold a smoothed random field: realistic score-map topology."""
    field = rng.random((h, w))
    sm = np.cumsum(np.cumsum(field, axis=0), axis=1)
    pad = np.zeros((h + 1, w + 1))
    pad[1:, 1:] = sm
    k = max(2, min(h, w) // 8)
    box = (
        pad[k:, k:] - pad[:-k, k:] - pad[k:, :-k] + pad[:-k, :-k]
    ) / (k * k)
    core = np.zeros((h, w))
    core[: box.shape[0], : box.shape[1]] = box
    lo, hi = core.min(), core.max()
    return (core - lo) / (hi - lo or 1.0) > gamma


def masks_for(rng, h, w):
    out = [("uniform 5%", rng.random((h, w)) < 0.05),
           ("uniform 50%", rng.random((h, w)) < 0.50),
           ("uniform 80%", rng.random((h, w)) < 0.80)]
    for gamma in (0.3, 0.5, 0.7):
        out.append((f"blobby g={gamma}", blobby_mask(rng, h, w, gamma)))
    return out


def best_time(fn, mask):
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(mask)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    if _ccl is None:
        print("compiled kernel unavailable; nothing to compare")
        return
    rng = np.random.default_rng(7)
    print(f"{'size':>9}  {'mask':<12} {'compiled':>10} {'python':>10} {'speedup':>8}")
    for h, w in SIZES:
        for name, mask in masks_for(rng, h, w):
            got_c = _ccl.component_stats(mask)
            got_p = ccl_py.component_stats(mask)
            assert np.array_equal(got_c[0], got_p[0]) and np.array_equal(got_c[1], got_p[1]), (
                f"backend mismatch on {name} at {h}x{w}"
            )
            tc = best_time(_ccl.component_stats, mask)
            tp = best_time(ccl_py.component_stats, mask)
            print(f"{h:>4}x{w:<4}  {name:<12} {tc * 1e6:>8.1f}us {tp * 1e6:>8.1f}us {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
