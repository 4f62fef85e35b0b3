"""Build the optional compiled kernels; the package works without them."""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("POINTER_COLLAPSE_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "pointer_collapse._kernels",
                    ["src/pointer_collapse/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    # keep IEEE semantics so results match the Python fallback bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError as exc:
        print(f"pointer_collapse: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
