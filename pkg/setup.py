"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so a failed compile downgrades to a warning
instead of aborting the install.
"""
import sys

from setuptools import Extension, setup


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("mixedcorr: Cython not available, skipping compiled kernels",
              file=sys.stderr)
        return []
    ext = Extension(
        "mixedcorr._kernels_c",
        sources=["src/mixedcorr/_kernels_c.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions())
