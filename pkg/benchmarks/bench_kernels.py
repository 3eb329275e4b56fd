"""Time the numba kernels against their pure-numpy fallbacks and check they agree.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import os
import time

import numpy as np

from twiststats import kernels
from twiststats.arith import prime_table, resolve_form, squarefree_mask
from twiststats.proxy import prime_coefficients


def _time(func, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = func()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases():
    absd = np.arange(100_001, 140_001, dtype=np.int64)
    absd = absd[(absd % 4 == 1) & squarefree_mask(100_001, 140_000)]
    primes, coef = prime_coefficients(resolve_form("37a1"), 1000)
    pt = prime_table(200_000)
    big = pt.primes_between(5, 200_000)
    lam_p = resolve_form("37a1").prime_lambdas(20_000)
    good = (37 % np.maximum(np.arange(lam_p.size), 1)) != 0
    return {
        "jacobi_array": lambda: kernels.jacobi_array(absd - 3, absd),
        "twisted_prime_sums": lambda: kernels.twisted_prime_sums(absd, primes, coef[None, :]),
        "cubic_root_counts": lambda: kernels.cubic_root_counts(0, -16, 16, big),
        "hecke_table": lambda: kernels.hecke_table(np.nan_to_num(lam_p), good,
                                                   prime_table(20_000).lpf, 20_000),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':22s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}  agree")
    for name, func in cases().items():
        os.environ["TWISTSTATS_BACKEND"] = "numba"
        func()  # compile / load cache
        tn, a = _time(func, args.repeat)
        os.environ["TWISTSTATS_BACKEND"] = "numpy"
        tp, b = _time(func, args.repeat)
        same = np.array_equal(np.asarray(a), np.asarray(b)) or np.allclose(a, b, rtol=0,
                                                                           atol=1e-12)
        print(f"{name:22s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f}  {same}")
    os.environ.pop("TWISTSTATS_BACKEND", None)


if __name__ == "__main__":
    main()
