"""Build script for the optional compiled kernel core.

The package works without the extension (a NumPy fallback is selected at
import time); building it makes the hot kernels 10-100x faster.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "betafield._core",
                ["src/betafield/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
