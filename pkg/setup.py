"""Build script. The compiled labeling kernel is optional: if Cython or a C
compiler is unavailable the install still succeeds and the package uses the
pure-NumPy fallback at import time."""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SCMAP_SKIP_EXTENSION"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "scmap._kernels._ccl",
                    ["src/scmap/_kernels/_ccl.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
