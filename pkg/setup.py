"""Build script for the optional compiled kernel extension.

The package works without the extension: srforms.kernels falls back to the
vectorized numpy implementation when srforms._ckern is missing. The build is
therefore best-effort; any compilation failure downgrades to pure python.
"""

import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "srforms._ckern",
                ["src/srforms/_ckern.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print("srforms: skipping compiled kernels (%s)" % exc, file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
