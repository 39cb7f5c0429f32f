"""Build script for the optional compiled CTC kernels.

The package works without the extension (a pure-numpy twin is selected at
import time); the build therefore never hard-fails when Cython or a C
compiler is missing.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "deskasr._kernels._ctc_ext",
                ["src/deskasr/_kernels/_ctc_ext.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    import sys

    print(f"deskasr: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
