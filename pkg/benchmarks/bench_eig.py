#!/usr/bin/env python3
"""Benchmark the compiled Jacobi kernel against the pure-numpy fallback.

Also times numpy.linalg.eigh as an external reference point. Run:

    python3 benchmarks/bench_eig.py [--dims 16,64,128] [--repeats 3]
"""

import argparse
import time

import numpy as np

from ria import linalg
from ria._jacobi_py import jacobi_eigh as jacobi_pure
from ria.backend import HAVE_COMPILED

if HAVE_COMPILED:
    from ria._jacobi import jacobi_eigh as jacobi_compiled
else:
    jacobi_compiled = None


def time_solver(solver, matrices, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for m in matrices:
            solver(m)
        best = min(best, (time.perf_counter() - start) / len(matrices))
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", default="16,64,128")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--matrices", type=int, default=5)
    args = parser.parse_args()
    dims = [int(d) for d in args.dims.split(",")]

    print(f"compiled kernel available: {HAVE_COMPILED}")
    header = f"{'d':>5}  {'compiled':>12}  {'pure numpy':>12}  {'speedup':>8}  {'np.eigh':>12}"
    print(header)
    print("-" * len(header))
    for d in dims:
        matrices = [linalg.random_spd(d, seed=1000 + i, cond=100) for i in range(args.matrices)]
        t_pure = time_solver(jacobi_pure, matrices, args.repeats)
        t_np = time_solver(np.linalg.eigh, matrices, args.repeats)
        if jacobi_compiled is not None:
            t_comp = time_solver(jacobi_compiled, matrices, args.repeats)
            print(
                f"{d:>5}  {t_comp * 1e3:>10.3f}ms  {t_pure * 1e3:>10.3f}ms  "
                f"{t_pure / t_comp:>7.1f}x  {t_np * 1e3:>10.3f}ms"
            )
        else:
            print(f"{d:>5}  {'-':>12}  {t_pure * 1e3:>10.3f}ms  {'-':>8}  {t_np * 1e3:>10.3f}ms")

        # both paths must agree with the reference to full precision
        w_ref = np.sort(np.linalg.eigh(matrices[0])[0])
        for solver in filter(None, (jacobi_compiled, jacobi_pure)):
            w = np.sort(solver(matrices[0])[0])
            assert np.allclose(w, w_ref, rtol=1e-10), "kernel disagrees with reference"


if __name__ == "__main__":
    main()
