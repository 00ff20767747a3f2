"""Pure-NumPy cyclic Jacobi eigensolver, the fallback twin of the compiled
kernel. Same rotation schedule and convergence test; each rotation updates
two rows/columns with vectorized array operations, so it is exact but
markedly slower on large matrices (see benchmarks/bench_eig.py).
"""

from __future__ import annotations

import numpy as np


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Return (eigenvalues, eigenvectors, sweeps, off_norm); unsorted."""
    A = np.array(matrix, dtype=np.float64, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    anorm = float(np.linalg.norm(A))
    if n == 1 or anorm == 0.0:
        return np.diag(A).copy(), V, 0, 0.0
    skip = tol * anorm / n

    def off_norm() -> float:
        return float(np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2)))

    sweeps_run = max_sweeps
    off = off_norm()
    for sweep in range(max_sweeps):
        off = off_norm()
        if off <= tol * anorm:
            sweeps_run = sweep
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = A[p, p], A[q, q]
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                vcol_p = V[:, p].copy()
                vcol_q = V[:, q].copy()
                V[:, p] = c * vcol_p - s * vcol_q
                V[:, q] = s * vcol_p + c * vcol_q
    else:
        off = off_norm()
        if off <= tol * anorm:
            sweeps_run = max_sweeps
        else:
            return np.diag(A).copy(), V, max_sweeps, off
    return np.diag(A).copy(), V, sweeps_run, off_norm()
