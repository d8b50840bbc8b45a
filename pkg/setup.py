"""Build script for the optional compiled kernels.

The package is fully functional without the extension (a numpy fallback is
selected at import time); building it just makes the classifier kernels
faster.  `pip install -e . --no-build-isolation` compiles it when Cython and
a C toolchain are available.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "asnmkit.kernels._speedups",
                ["src/asnmkit/kernels/_speedups.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
