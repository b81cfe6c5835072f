"""Timing comparison of the jitted and plain-numpy kernel paths.

Runs each kernel on growing inputs and prints microseconds per call for
both implementations.  The jitted path is warmed up before timing so
compilation cost is not counted.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from dynareg import _kernels_numpy

try:
    from dynareg import _kernels_numba
except ImportError:
    _kernels_numba = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e6


def bench_fwht(repeats):
    print("fwht_inplace (cols=4)")
    print("%10s %14s %14s %9s" % ("n", "numpy (us)", "numba (us)", "speedup"))
    for n in (256, 1024, 4096, 16384, 65536):
        rng = np.random.default_rng(n)
        base = rng.normal(size=(n, 4))
        scratch = base.copy()

        def run_numpy():
            scratch[:] = base
            _kernels_numpy.fwht_inplace(scratch)

        t_np = best_of(run_numpy, repeats)
        if _kernels_numba is None:
            print("%10d %14.1f %14s %9s" % (n, t_np, "-", "-"))
            continue

        def run_numba():
            scratch[:] = base
            _kernels_numba.fwht_inplace(scratch)

        run_numba()
        t_nb = best_of(run_numba, repeats)
        print("%10d %14.1f %14.1f %8.2fx" % (n, t_np, t_nb, t_np / t_nb))


def bench_accumulate(repeats):
    print()
    print("countsketch_accumulate (q=712, cols=4)")
    print("%10s %14s %14s %9s" % ("n", "numpy (us)", "numba (us)", "speedup"))
    for n in (1024, 8192, 65536, 262144):
        rng = np.random.default_rng(n)
        rows = rng.integers(0, 712, size=n)
        signs = rng.integers(0, 2, size=n) * 2.0 - 1.0
        mat = rng.normal(size=(n, 4))
        out = np.zeros((712, 4))

        def run_numpy():
            out[:] = 0.0
            _kernels_numpy.countsketch_accumulate(rows, signs, mat, out)

        t_np = best_of(run_numpy, repeats)
        if _kernels_numba is None:
            print("%10d %14.1f %14s %9s" % (n, t_np, "-", "-"))
            continue

        def run_numba():
            out[:] = 0.0
            _kernels_numba.countsketch_accumulate(rows, signs, mat, out)

        run_numba()
        t_nb = best_of(run_numba, repeats)
        print("%10d %14.1f %14.1f %8.2fx" % (n, t_np, t_nb, t_np / t_nb))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    if _kernels_numba is None:
        print("numba unavailable; timing the numpy path only")
    bench_fwht(args.repeats)
    bench_accumulate(args.repeats)


if __name__ == "__main__":
    main()
