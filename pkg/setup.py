"""Build script for the optional compiled kernel backend.

The accelerated kernels live in ``recall_forge.kernels._cykernels``.  If
Cython or a C compiler is unavailable the build falls back to a pure-Python
wheel; the package selects the NumPy backend at import time in that case.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/recall_forge/kernels/_cykernels.pyx",
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.define_macros.append(("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION"))
        if not sys.platform.startswith("win"):
            ext.extra_compile_args.append("-O3")
except ImportError as exc:  # pragma: no cover - build-environment dependent
    print(f"warning: compiled kernels skipped ({exc}); "
          "the NumPy fallback backend will be used", file=sys.stderr)

setup(ext_modules=ext_modules)
