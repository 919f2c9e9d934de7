"""Build script: compiles the optional Cython stepping kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a missing compiler or missing Cython must not fail the
build.
"""
import os
import sys

from setuptools import Extension, setup


def extensions():
    if os.environ.get("CROSSDIFF_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        print("crossdiff: Cython or numpy unavailable, building without the "
              "compiled kernel", file=sys.stderr)
        return []
    return cythonize(
        [
            Extension(
                "crossdiff.particles._step_cy",
                ["src/crossdiff/particles/_step_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )


setup(ext_modules=extensions())
