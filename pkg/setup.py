"""Build the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
numpy fallback in ``aqclab._kernels._pykernels`` is used at import time.
"""
import os
import platform

from setuptools import setup

# hardware popcount; without it the builtin falls back to a bit-twiddling loop
ARCH_FLAGS = ["-mpopcnt"] if platform.machine().lower() in ("x86_64", "amd64") else []

ext_modules = []
if not os.environ.get("AQCLAB_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "aqclab._kernels._ckernels",
                    ["src/aqclab/_kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", *ARCH_FLAGS],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
