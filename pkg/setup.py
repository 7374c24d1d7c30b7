import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("OPENTI_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "openti.sim._stepcore",
                    ["src/openti/sim/_stepcore.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # Pure-Python step kernel is selected at import time when the
        # compiled one is unavailable.
        ext_modules = []

setup(ext_modules=ext_modules)
