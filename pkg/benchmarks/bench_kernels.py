"""Compare the numba and pure-numpy kernels on NNLS fits and fold metrics.

    python3 benchmarks/bench_kernels.py [--repeat N]

The first numba call compiles; its cost is reported separately.
"""

import argparse
import time

import numpy as np

from em0 import _kernels


def problems(count, rows, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        X = rng.uniform(0, 1, (rows, 6)) * rng.uniform(1e3, 1e6, 6)
        y = X @ rng.normal(0.5, 1, 6) + rng.normal(0, 1e3, rows)
        out.append((X, y))
    return out


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--problems", type=int, default=200)
    ap.add_argument("--rows", type=int, default=230)
    args = ap.parse_args()

    data = problems(args.problems, args.rows)
    y = np.random.default_rng(1).uniform(1, 10, 100_000)
    yhat = y * (1 + np.random.default_rng(2).normal(0, 0.01, y.size))

    t = time.perf_counter()
    _kernels.nnls(*data[0], backend="numba")
    _kernels.r2_score(y, yhat, True, backend="numba")
    _kernels.mape_percent(y, yhat, backend="numba")
    print(f"numba compile: {time.perf_counter() - t:.3f}s")

    for backend in ("numpy", "numba"):
        fit = bench(lambda: [_kernels.nnls(X, b, backend=backend) for X, b in data], args.repeat)
        met = bench(lambda: (_kernels.r2_score(y, yhat, True, backend=backend),
                             _kernels.mape_percent(y, yhat, backend=backend)), args.repeat)
        print(f"{backend:6s} nnls x{args.problems} ({args.rows}x6): {fit * 1e3:8.2f} ms"
              f"   r2+mape n={y.size}: {met * 1e3:7.3f} ms")

    worst = max(np.max(np.abs(_kernels.nnls(X, b, backend="numba") - _kernels.nnls(X, b, backend="numpy")))
                for X, b in data)
    print(f"max |numba - numpy| coefficient difference: {worst:.3e}")


if __name__ == "__main__":
    main()
