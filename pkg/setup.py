"""Build script for the optional compiled eigensolver kernel.

The package is pure Python with a NumPy fallback; building the Cython
extension is best effort. An install without a C compiler still works,
it just selects the slower kernel at import time.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "gnnlab._jacobi_cy",
                ["src/gnnlab/_jacobi_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
