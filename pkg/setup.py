"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure NumPy implementation is
selected at import time), so the build degrades gracefully when Cython or
a C compiler is unavailable, or when FUSIONKIT_NO_EXT is set.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FUSIONKIT_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "fusionkit._kernels",
                    ["src/fusionkit/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
