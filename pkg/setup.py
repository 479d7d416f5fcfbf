import os

from setuptools import Extension, setup

# The compiled kernels are optional: without Cython (or with
# GRIDIRON_NO_EXT=1) the package installs pure-Python and selects the
# fallback implementations at import time.
ext_modules = []
if os.environ.get("GRIDIRON_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "gridiron._kernels._speedups",
                    ["src/gridiron/_kernels/_speedups.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
