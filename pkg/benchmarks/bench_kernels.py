"""Time the numba and numpy kernel paths on mixture-sized inputs.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20]

Compile time is excluded (one warm-up call per kernel). Each row reports the
best-of-``repeat`` wall time for both paths, their ratio, and the largest
absolute difference between the two results.
"""

import argparse
import time

import numpy as np

from csgm._kernels import get_kernels, numba_available


def _best(fn, args, repeat):
    fn(*args)  # warm-up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _problem(n, d, k, rng):
    X = rng.normal(size=(n, d))
    means = rng.normal(size=(k, d))
    chols = np.empty((k, d, d))
    for j in range(k):
        A = rng.normal(size=(d, d))
        chols[j] = np.linalg.cholesky(A @ A.T / d + np.eye(d))
    log_w = np.log(np.full(k, 1.0 / k))
    return X, means, chols, log_w


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not numba_available():
        print("numba is not installed; nothing to compare")
        return
    fast, slow = get_kernels("numba"), get_kernels("numpy")
    rng = np.random.default_rng(args.seed)

    cases = []
    for n, d, k in ((700, 61, 6), (460, 14, 10), (2000, 8, 4)):
        X, means, chols, log_w = _problem(n, d, k, rng)
        lp = slow.weighted_log_density(X, means, chols, log_w)
        cases += [
            (f"weighted_log_density n={n} d={d} K={k}", "weighted_log_density",
             (X, means, chols, log_w)),
            (f"log_normalize_rows n={n} K={k}", "log_normalize_rows", (lp,)),
        ]
    for n, d in ((300, 61), (1000, 14)):
        cases.append((f"nearest_neighbours n={n} d={d}", "nearest_neighbours",
                      (rng.normal(size=(n, d)),)))

    print(f"{'kernel':45s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'max diff':>10s}")
    for label, name, fargs in cases:
        f_fast, f_slow = getattr(fast, name), getattr(slow, name)
        t_slow = _best(f_slow, fargs, args.repeat)
        t_fast = _best(f_fast, fargs, args.repeat)
        diff = _diff(f_fast(*fargs), f_slow(*fargs))
        print(f"{label:45s} {t_slow * 1e3:10.3f} {t_fast * 1e3:10.3f} "
              f"{t_slow / t_fast:8.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
