"""Build script: compiles the optional native kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so any failure during cythonization or compilation downgrades
to a pure-Python install instead of aborting.
"""

import sys

from setuptools import Extension, setup


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:  # pragma: no cover - build-time path
        print(f"pidal: native kernel skipped ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "pidal.kernels._native",
        ["src/pidal/kernels/_native.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        return cythonize([ext], language_level=3)
    except Exception as exc:  # pragma: no cover - build-time path
        print(f"pidal: native kernel skipped ({exc})", file=sys.stderr)
        return []


setup(ext_modules=extensions())
