"""Build script: compiles the optional fast inner-loop extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so the build degrades gracefully when Cython is
unavailable.  Set DRAGEKF_SKIP_EXT=1 to force a pure-Python install.
"""

import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None and not os.environ.get("DRAGEKF_SKIP_EXT"):
    extensions = cythonize(
        [
            Extension(
                "dragekf._backend._fastloops",
                ["src/dragekf/_backend/_fastloops.pyx"],
                # deliberately no -ffast-math: the fallback and the extension
                # must agree to near machine precision
                extra_compile_args=["-O2"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
