"""Build the optional compiled kernel module.

The package works without it (``delayest._pykernels`` is used instead), so a
missing Cython or compiler only produces a warning.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "delayest._core",
                ["src/delayest/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:  # pragma: no cover
    print(f"delayest: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
