import os

from setuptools import Extension, setup

# The compiled stepper is an optimization, not a requirement: the package
# falls back to the pure-Python stepper when the extension is absent.
# Set CUSPGEO_NO_EXT=1 to skip compilation entirely.
ext_modules = []
if not os.environ.get("CUSPGEO_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cuspgeo._rk45",
                ["src/cuspgeo/_rk45.pyx"],
                # -ffp-contract=off keeps results bit-comparable with the
                # pure-Python stepper (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
