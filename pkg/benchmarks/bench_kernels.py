"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel and size with the best-of-N time for each backend,
the speedup, and the largest absolute difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from datamarket import _pykernels as py

try:
    from datamarket import _ckernels as cy
except ImportError:  # extension not built
    cy = None


def unit_rows(rng, n, dim):
    m = rng.standard_normal((n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def cases(rng):
    for n in (1_000, 10_000, 100_000):
        m = unit_rows(rng, n, 256)
        q = m[0] + 0.1 * rng.standard_normal(256)
        q /= np.linalg.norm(q)
        yield f"cosine_topk n={n} k=20", "cosine_topk", (m, q, 20)
    for n in (1_000, 50_000):
        x = np.sort(np.floor((1 - rng.random(n)) ** (-1 / 1.5)).astype(np.float64))
        yield f"approx_xmin_scan n={n}", "approx_xmin_scan", (x, 10)
    for n in (1_000, 100_000):
        s = np.cumsum(rng.standard_normal(n))
        yield f"acf_lag1 n={n}", "acf_lag1", (s,)


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'case':32s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for label, name, argv in cases(rng):
        fpy = getattr(py, name)
        t_py = min(timeit.repeat(lambda: fpy(*argv), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{label:32s} {t_py:10.3f} {'n/a':>10s}")
            continue
        fcy = getattr(cy, name)
        t_cy = min(timeit.repeat(lambda: fcy(*argv), number=1, repeat=args.repeat)) * 1e3
        diff = max_diff(fpy(*argv), fcy(*argv))
        print(f"{label:32s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:8.2f} {diff:11.2e}")


if __name__ == "__main__":
    main()
