"""Benchmark the numba kernels against their pure-numpy fallbacks.

Times one SMO solve and one t-SNE calibration + gradient pass per problem
size on both paths.  The numba path is warmed once so JIT compilation does
not pollute the numbers.

    python benchmarks/bench_kernels.py --sizes 200 400 800
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vocalfatigue import kernels
from vocalfatigue.svm import rbf_kernel_matrix


def svm_problem(m, seed=0):
    rng = np.random.default_rng(seed)
    x = np.vstack([
        rng.normal(0.0, 1.0, (m // 2, 8)),
        rng.normal(1.5, 1.0, (m - m // 2, 8)),
    ])
    signs = np.array([-1.0] * (m // 2) + [1.0] * (m - m // 2))
    return rbf_kernel_matrix(x, x, 0.1), signs


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[200, 400, 800])
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not kernels.HAVE_NUMBA:
        print("numba unavailable; only the numpy path can be timed")

    print(f"{'kernel':<24}{'n':>6}{'numpy':>12}{'numba':>12}{'speedup':>9}")
    for m in args.sizes:
        kmat, signs = svm_problem(m)
        if kernels.HAVE_NUMBA:
            kernels.smo_solve(kmat, signs, 10.0, 1e-3, 100_000, use_numba=True)  # warm JIT
        t_np = time_call(lambda: kernels.smo_solve(kmat, signs, 10.0, 1e-3, 100_000, use_numba=False), args.repeats)
        if kernels.HAVE_NUMBA:
            t_nb = time_call(lambda: kernels.smo_solve(kmat, signs, 10.0, 1e-3, 100_000, use_numba=True), args.repeats)
            print(f"{'smo_solve':<24}{m:>6}{t_np:>11.4f}s{t_nb:>11.4f}s{t_np / t_nb:>8.1f}x")
        else:
            print(f"{'smo_solve':<24}{m:>6}{t_np:>11.4f}s{'-':>12}{'-':>9}")

        rng = np.random.default_rng(1)
        x = rng.normal(size=(m, 16))
        d2 = kernels.squared_distances(x)
        if kernels.HAVE_NUMBA:
            kernels.perplexity_calibrate(d2, 30.0, use_numba=True)
        t_np = time_call(lambda: kernels.perplexity_calibrate(d2, 30.0, use_numba=False), args.repeats)
        if kernels.HAVE_NUMBA:
            t_nb = time_call(lambda: kernels.perplexity_calibrate(d2, 30.0, use_numba=True), args.repeats)
            print(f"{'perplexity_calibrate':<24}{m:>6}{t_np:>11.4f}s{t_nb:>11.4f}s{t_np / t_nb:>8.1f}x")
        else:
            print(f"{'perplexity_calibrate':<24}{m:>6}{t_np:>11.4f}s{'-':>12}{'-':>9}")

        p, _ = kernels.perplexity_calibrate(d2, 30.0)
        p = (p + p.T) / (2 * m)
        np.fill_diagonal(p, 0.0)
        yemb = rng.normal(size=(m, 2))
        if kernels.HAVE_NUMBA:
            kernels.kl_gradient(p, yemb, use_numba=True)
        t_np = time_call(lambda: kernels.kl_gradient(p, yemb, use_numba=False), args.repeats)
        if kernels.HAVE_NUMBA:
            t_nb = time_call(lambda: kernels.kl_gradient(p, yemb, use_numba=True), args.repeats)
            print(f"{'kl_gradient':<24}{m:>6}{t_np:>11.4f}s{t_nb:>11.4f}s{t_np / t_nb:>8.1f}x")
        else:
            print(f"{'kl_gradient':<24}{m:>6}{t_np:>11.4f}s{'-':>12}{'-':>9}")


if __name__ == "__main__":
    main()
