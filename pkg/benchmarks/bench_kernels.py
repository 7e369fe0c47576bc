#!/usr/bin/env python3
"""Benchmark the JIT kernels against their pure-numpy twins.

Runs the dense max-plus matrix action, the on-the-fly product-kernel
action, and the linear-time conjugate transform at several sizes,
checking bit-identical outputs along the way.

    python benchmarks/bench_kernels.py [--sizes 512,2048,4096] [--repeat 9]

Requires the numba backend (run without MAXPLUS_BACKEND=numpy).
"""

import argparse
import time

import numpy as np

from maxplus import _kernels


def timeit(fn, *args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def bench(sizes, repeat):
    if not _kernels.USE_NUMBA:
        raise SystemExit(
            "numba backend inactive (MAXPLUS_BACKEND=numpy?); nothing to compare"
        )
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        table = rng.uniform(-5, 5, (n, n))
        table[rng.random((n, n)) < 0.1] = -np.inf
        neg_f = rng.uniform(-5, 5, n)
        x = np.sort(rng.uniform(-3, 3, n))
        y = np.linspace(-2, 2, n)
        slopes = y
        icepts = rng.uniform(-4, 4, n)

        cases = [
            ("table matvec", _kernels._nb_matvec_table, _kernels._np_matvec_table,
             (table, neg_f)),
            ("product matvec", _kernels._nb_matvec_bilinear,
             _kernels._np_matvec_bilinear, (x, y, neg_f)),
            ("envelope merge", _kernels._nb_envelope_merge,
             _kernels._np_envelope_merge, (slopes, icepts, x)),
        ]
        for name, jit_fn, np_fn, args in cases:
            out_jit = jit_fn(*args)  # warm compile before timing
            out_np = np_fn(*args)
            assert np.array_equal(out_jit, out_np), f"{name} @{n}: backends disagree"
            t_jit = timeit(jit_fn, *args, repeat=repeat)
            t_np = timeit(np_fn, *args, repeat=repeat)
            rows.append((name, n, t_jit, t_np))

    print(f"{'kernel':<16} {'n':>6} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, n, t_jit, t_np in rows:
        print(f"{name:<16} {n:>6} {t_jit:>10.3f} {t_np:>10.3f} {t_np / t_jit:>7.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="512,2048,4096")
    ap.add_argument("--repeat", type=int, default=9)
    args = ap.parse_args()
    bench([int(s) for s in args.sizes.split(",")], args.repeat)


if __name__ == "__main__":
    main()
