"""Cross-checks between the compiled Jacobi kernel, its NumPy twin, and
the LAPACK driver; the eigendecomposition postconditions."""

import numpy as np
import pytest

from gnnlab import NumericError, ParameterError, kernels, spectral


def random_symmetric(n, seed, sparse=0.0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    if sparse:
        A *= rng.random((n, n)) < sparse
    return A + A.T


@pytest.mark.parametrize("backend", ["jacobi", "jacobi-numpy", "lapack"])
@pytest.mark.parametrize("n", [1, 2, 7, 40])
def test_backends_agree_with_lapack(backend, n):
    A = random_symmetric(n, seed=n)
    w, v = spectral.eigendecompose(A, method=backend)
    w_ref = np.linalg.eigvalsh(A)[::-1]
    assert np.allclose(w, w_ref, atol=1e-10)
    assert np.allclose(v.T @ v, np.eye(n), atol=1e-10)


def test_backend_selected_at_import():
    assert kernels.JACOBI_BACKEND in ("cython", "numpy")
    assert callable(kernels.jacobi_eigh)
    assert callable(kernels.jacobi_eigh_numpy)


def test_compiled_and_numpy_twins_match():
    A = random_symmetric(24, seed=5)
    w1, v1, s1, off1 = kernels.jacobi_eigh(A)
    w2, v2, s2, off2 = kernels.jacobi_eigh_numpy(A)
    assert np.allclose(np.sort(w1), np.sort(w2), atol=1e-12)


def test_identity_matrix():
    w, v = spectral.eigendecompose(np.eye(5), method="jacobi")
    assert np.allclose(w, 1.0)


def test_diag_multiplicity():
    w, _ = spectral.eigendecompose(np.diag([3.0, 1.0, 1.0]))
    assert w[0] == pytest.approx(3.0, abs=1e-12)
    assert np.allclose(w[1:], 1.0, atol=1e-12)


@pytest.mark.parametrize("method", ["jacobi", "jacobi-numpy", "lapack"])
def test_reconstruction_residual(method):
    # Independent oracle: sum of lambda_j v_j v_j^T must rebuild the input.
    A = random_symmetric(50, seed=50)
    w, v = spectral.eigendecompose(A, method=method)
    rebuilt = (v * w[None, :]) @ v.T
    rel = np.linalg.norm(rebuilt - A) / np.linalg.norm(A)
    assert rel <= 1e-9


def test_eigenvalues_sorted_descending():
    w, _ = spectral.eigendecompose(random_symmetric(20, seed=9))
    assert np.all(np.diff(w) <= 1e-12)


def test_nonsymmetric_rejected():
    A = np.arange(9.0).reshape(3, 3)
    with pytest.raises(ParameterError):
        spectral.eigendecompose(A)


def test_sweep_cap_reports_residual():
    A = random_symmetric(30, seed=3)
    with pytest.raises(NumericError, match="off-diagonal"):
        spectral.eigendecompose(A, method="jacobi", max_sweeps=1)


def test_zero_matrix():
    w, v = spectral.eigendecompose(np.zeros((4, 4)), method="jacobi")
    assert np.allclose(w, 0.0)
    assert np.allclose(v.T @ v, np.eye(4), atol=1e-14)
