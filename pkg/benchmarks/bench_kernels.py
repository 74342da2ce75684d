"""Benchmark the compiled kernel backend against the NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [N]
N is the number of quadrature-point values per call (default 200000).
"""
import sys
import timeit

import numpy as np

from entrolevel._kernels import _py

try:
    from entrolevel._kernels import _fast
except ImportError:
    _fast = None


def bench(fn, repeat=5, number=20):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    rng = np.random.default_rng(0)
    x = rng.uniform(-2.0, 2.0, n)
    y = rng.uniform(-2.0, 2.0, n)
    eps = 0.7

    rows = []
    for name, call in [
        ("hpoly order 0", lambda k: k.hpoly(x, 0)),
        ("hpoly order 1", lambda k: k.hpoly(x, 1)),
        ("hpoly order 2", lambda k: k.hpoly(x, 2)),
        ("aux_surrogates", lambda k: k.aux_surrogates(x, y, eps)),
    ]:
        t_py = bench(lambda: call(_py))
        if _fast is not None:
            t_fast = bench(lambda: call(_fast))
            rows.append((name, t_py, t_fast, t_py / t_fast))
        else:
            rows.append((name, t_py, None, None))

    print(f"n = {n} points per call")
    print(f"{'kernel':<16} {'numpy [ms]':>12} {'compiled [ms]':>14} "
          f"{'speedup':>9}")
    for name, t_py, t_fast, sp in rows:
        if t_fast is None:
            print(f"{name:<16} {1e3 * t_py:>12.3f} {'n/a':>14} {'n/a':>9}")
        else:
            print(f"{name:<16} {1e3 * t_py:>12.3f} {1e3 * t_fast:>14.3f} "
                  f"{sp:>8.1f}x")
    if _fast is None:
        print("compiled extension not available; numpy fallback only")


if __name__ == "__main__":
    main()
