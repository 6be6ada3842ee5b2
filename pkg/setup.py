"""Build script: compiles the optional Cython simulation kernel.

If Cython or a C compiler is unavailable the package still installs and
falls back to the pure-numpy kernel at import time (see delayval._backend).
"""
import sys

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "delayval._kernels",
                ["src/delayval/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps C arithmetic bit-identical to the
                # numpy fallback (no FMA contraction); do not add -ffast-math.
                extra_compile_args=["-O3", "-march=native", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("Cython/numpy unavailable at build time; installing pure-python kernels only",
          file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
