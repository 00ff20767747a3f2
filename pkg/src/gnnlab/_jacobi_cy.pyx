# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cyclic Jacobi eigensolver for dense symmetric matrices (compiled kernel).

Row-cyclic sweeps of Givens rotations annihilate off-diagonal entries in
place; the accumulated rotations form the eigenvector matrix. Convergence
is declared when the off-diagonal Frobenius norm drops below
``tol * ||A||_F``. Tiny pivots (below ``tol * ||A||_F / n``) are skipped
within a sweep, which preserves the convergence test while avoiding
useless rotations.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def jacobi_eigh(cnp.ndarray[cnp.float64_t, ndim=2] matrix,
                double tol=1e-12, int max_sweeps=100):
    """Return (eigenvalues, eigenvectors, sweeps, off_norm); unsorted."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.array(matrix, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.eye(n, dtype=np.float64)
    cdef double anorm = np.linalg.norm(A)
    cdef double off, skip, apq, app, aqq, theta, t, c, s, aip, aiq, vip, viq
    cdef Py_ssize_t sweep, p, q, i
    cdef int done = 0

    if n == 1:
        return np.array([A[0, 0]]), V, 0, 0.0
    if anorm == 0.0:
        return np.zeros(n), V, 0, 0.0

    skip = tol * anorm / n
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * A[p, q] * A[p, q]
        off = sqrt(off)
        if off <= tol * anorm:
            done = 1
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if fabs(apq) <= skip:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        aip = A[i, p]
                        aiq = A[i, q]
                        A[i, p] = c * aip - s * aiq
                        A[i, q] = s * aip + c * aiq
                        A[p, i] = A[i, p]
                        A[q, i] = A[i, q]
                    vip = V[i, p]
                    viq = V[i, q]
                    V[i, p] = c * vip - s * viq
                    V[i, q] = s * vip + c * viq
    if not done:
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * A[p, q] * A[p, q]
        off = sqrt(off)
        if off > tol * anorm:
            return np.diag(A).copy(), V, max_sweeps, off
        sweep = max_sweeps - 1
    return np.diag(A).copy(), V, sweep + 1, off
