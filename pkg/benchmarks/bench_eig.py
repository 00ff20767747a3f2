"""Benchmark the eigensolver kernels: compiled cyclic Jacobi vs its
pure-NumPy twin vs the LAPACK driver, on normalized adjacencies of
two-block graphs at several sizes.

Run:  python benchmarks/bench_eig.py [--sizes 64 128 256] [--repeats 3]

The compiled kernel wins over the NumPy twin by two to three orders of
magnitude (per-rotation Python overhead dominates the twin); LAPACK's
blocked tridiagonalization still beats cyclic Jacobi at large sizes, which
is why the package's `auto` method hands production-size operators to
LAPACK and keeps the Jacobi pair as the small-size default and as a
cross-checkable reference.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from gnnlab import graphs, kernels
from gnnlab.spectral import eigendecompose, normalized_adjacency


def test_matrix(n: int, seed: int = 0) -> np.ndarray:
    a = min(6.0, 0.9 * n / math.log(max(n, 3)))
    g = graphs.generate_ssbm(graphs.SSBMParams(n=n, a=a, b=a / 4, seed=seed))
    return normalized_adjacency(g, self_loops=True, method="lapack").matrix


def timed(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"compiled kernel available: {kernels.JACOBI_BACKEND == 'cython'}")
    header = f"{'n':>6} {'jacobi-compiled':>16} {'jacobi-numpy':>14} {'lapack':>10} {'max |dw|':>10}"
    print(header)
    print("-" * len(header))
    for n in args.sizes:
        A = test_matrix(n)
        w_ref = np.linalg.eigvalsh(A)[::-1]
        t_lapack = timed(lambda: np.linalg.eigh(A), args.repeats)
        if kernels.JACOBI_BACKEND == "cython":
            t_compiled = timed(lambda: kernels.jacobi_eigh(A), args.repeats)
            w_c, _, _, _ = kernels.jacobi_eigh(A)
            err_c = np.max(np.abs(np.sort(w_c)[::-1] - w_ref))
            compiled = f"{t_compiled * 1e3:13.1f} ms"
        else:
            compiled, err_c = "   (not built)", 0.0
        t_numpy = timed(lambda: kernels.jacobi_eigh_numpy(A), args.repeats)
        w_n, _, _, _ = kernels.jacobi_eigh_numpy(A)
        err = max(err_c, np.max(np.abs(np.sort(w_n)[::-1] - w_ref)))
        print(f"{n:>6} {compiled:>16} {t_numpy * 1e3:11.1f} ms {t_lapack * 1e3:7.1f} ms {err:10.1e}")
    # The selected default must agree with LAPACK on a fresh matrix.
    A = test_matrix(96, seed=1)
    w, _ = eigendecompose(A)
    assert np.allclose(w, np.linalg.eigvalsh(A)[::-1], atol=1e-9)
    print("auto-selected method agrees with LAPACK to 1e-9")


if __name__ == "__main__":
    main()
