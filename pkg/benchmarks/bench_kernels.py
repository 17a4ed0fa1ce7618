"""Time the numba and pure-numpy kernel builds on the same problems.

    python3 benchmarks/bench_kernels.py [--n 2000] [--d 20] [--repeat 5]

Compile time for the numba build is reported separately and excluded from the
per-call timings.
"""
import argparse
import time

import numpy as np

from panicreg import kernels as K
from panicreg.glm import LINEAR, LOGISTIC, Dataset


def problem(family, n, d, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    beta = np.where(np.arange(d) < d // 2, 1.0, 0.0)
    z = x @ beta
    if family is LOGISTIC:
        y = (rng.random(n) < 1 / (1 + np.exp(-z))).astype(float)
    else:
        y = z + rng.normal(size=n)
    return Dataset(x, y, family)


def run_fit(kern, args, lam, d, max_iter):
    return kern.prox_grad(*args, K.L1, 1.0, lam, 0.0, np.zeros(d), 0.05, 0.5, max_iter,
                          1e-7, 1e-12, False, np.empty(0))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--iters", type=int, default=2000)
    opts = ap.parse_args()

    slow = K.numpy_kernels()
    t0 = time.perf_counter()
    fast = K.numba_kernels()
    cases = [("linear/gram", LINEAR, True), ("linear/rows", LINEAR, False),
             ("logistic", LOGISTIC, False)]
    # first call triggers compilation (or loads the on-disk cache)
    for _, fam, gram in cases:
        d = problem(fam, 50, opts.d, 0)
        run_fit(fast, d.kernel_args(gram), 0.01, opts.d, 5)
    print(f"numba compile/load: {time.perf_counter() - t0:.2f}s")

    print(f"{'case':<14}{'kernel':<12}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, fam, gram in cases:
        data = problem(fam, opts.n, opts.d, 1)
        args = data.kernel_args(gram)
        beta = np.full(opts.d, 0.1)

        def grad(k):
            return lambda: [k.risk_grad(*args, 0.0, beta) for _ in range(100)]

        def fit(k):
            return lambda: run_fit(k, args, 0.02, opts.d, opts.iters)

        for label, make, per in (("risk_grad", grad, 100), ("prox_grad", fit, 1)):
            a = best_of(make(slow), opts.repeat) / per * 1e3
            b = best_of(make(fast), opts.repeat) / per * 1e3
            print(f"{name:<14}{label:<12}{a:>10.3f}{b:>10.3f}{a / b:>8.1f}x")

    # the two builds must agree
    data = problem(LOGISTIC, opts.n, opts.d, 2)
    r1 = run_fit(slow, data.kernel_args(False), 0.02, opts.d, opts.iters)
    r2 = run_fit(fast, data.kernel_args(False), 0.02, opts.d, opts.iters)
    print(f"max |beta_numpy - beta_numba| = {np.max(np.abs(r1[1] - r2[1])):.2e}")


if __name__ == "__main__":
    main()
