#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Sizes mirror the largest published dataset (10805 legitimate training rows,
whole-dataset scoring).  Run after `pip install -e . --no-build-isolation`:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

import asnmkit.kernels.pure as pure

try:
    import asnmkit.kernels._speedups as fast
except ImportError:
    fast = None


def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kde(n_train=10805, n_query=11445):
    rng = np.random.default_rng(0)
    train = np.sort(rng.normal(0.0, 1.0, n_train))
    query = np.ascontiguousarray(rng.normal(0.0, 2.0, n_query))
    h = 0.9 * train.std() * n_train ** -0.2
    rows = []
    t_pure = timeit(lambda: pure.kde_logpdf(train, h, query))
    rows.append(("kde_logpdf %dx%d" % (n_train, n_query), "py", t_pure))
    if fast is not None:
        t_fast = timeit(lambda: fast.kde_logpdf(train, h, query))
        rows.append(("kde_logpdf %dx%d" % (n_train, n_query), "c", t_fast))
        a = pure.kde_logpdf(train, h, query)
        b = fast.kde_logpdf(train, h, query)
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9), "backend disagreement"
    return rows


def bench_gini(n=11445, repeats=20):
    rng = np.random.default_rng(1)
    vals = np.sort(rng.normal(0.0, 1.0, n))
    cls = rng.integers(0, 2, n).astype(np.int64)

    def run(mod):
        def inner():
            for _ in range(repeats):
                mod.gini_scan(vals, cls, 2)
        return inner

    rows = [("gini_scan %d rows x%d" % (n, repeats), "py", timeit(run(pure)))]
    if fast is not None:
        rows.append(("gini_scan %d rows x%d" % (n, repeats), "c", timeit(run(fast))))
        a, b = pure.gini_scan(vals, cls, 2), fast.gini_scan(vals, cls, 2)
        assert np.isclose(a[0], b[0]) and a[1] == b[1], "backend disagreement"
    return rows


def main():
    if fast is None:
        print("compiled extension not built; timing the fallback only")
    results = bench_kde() + bench_gini()
    print("%-36s %-4s %10s" % ("kernel", "impl", "seconds"))
    by_kernel = {}
    for name, impl, secs in results:
        print("%-36s %-4s %10.4f" % (name, impl, secs))
        by_kernel.setdefault(name, {})[impl] = secs
    for name, impls in by_kernel.items():
        if "c" in impls and "py" in impls:
            print("%-36s speedup %.1fx" % (name, impls["py"] / impls["c"]))


if __name__ == "__main__":
    main()
