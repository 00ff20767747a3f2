"""Import-time selection of the eigensolver kernel.

The compiled Cython kernel is preferred; when the extension was not built
the pure-NumPy twin is selected instead. Both implement the identical
cyclic Jacobi algorithm and are cross-checked in the test suite. The
selected backend is reported in ``JACOBI_BACKEND`` and used by
``spectral.eigendecompose``.
"""

from __future__ import annotations

from . import _jacobi_np

try:
    from . import _jacobi_cy

    jacobi_eigh = _jacobi_cy.jacobi_eigh
    JACOBI_BACKEND = "cython"
except ImportError:  # extension not built
    jacobi_eigh = _jacobi_np.jacobi_eigh
    JACOBI_BACKEND = "numpy"

jacobi_eigh_numpy = _jacobi_np.jacobi_eigh
