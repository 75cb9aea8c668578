"""Build the optional Cython solver kernel.

The package works without it; ``qbranch.kernel`` falls back to the
pure-Python implementation when the extension is missing.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("QBRANCH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    import numpy
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "qbranch._kernel_ext",
                    ["src/qbranch/_kernel_ext.pyx"],
                    language="c++",
                    extra_compile_args=["-O3"],
                    optional=True,
                ),
                Extension(
                    "qbranch._gnn_ext",
                    ["src/qbranch/_gnn_ext.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    optional=True,
                ),
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
