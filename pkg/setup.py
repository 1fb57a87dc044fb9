import os

from setuptools import setup

ext_modules = []
if not os.environ.get("HAARFIELD_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "haarfield._car",
                    ["src/haarfield/_car.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # package works on the pure-numpy kernel when Cython is unavailable
        ext_modules = []

setup(ext_modules=ext_modules)
