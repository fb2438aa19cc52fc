"""Build script for the compiled sampler kernels.

The package is fully functional without the extension (a NumPy fallback
is selected at import time); building it just makes the MCMC sweeps an
order of magnitude faster. See benchmarks/benchmark_kernels.py.
"""

from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "catchtl.kernels._native",
        ["src/catchtl/kernels/_native.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
