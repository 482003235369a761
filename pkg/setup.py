"""Build script for the optional compiled Monte Carlo kernel.

The package works without the extension (a pure-Python twin of the kernel
is selected at import time), so a failed extension build only costs speed.
"""

import os

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    compile_args = [
        "-O3",
        "-march=native",
        "-funroll-loops",
        # Contraction to FMA would break bit-for-bit agreement with the
        # pure-Python kernel twin, which tests rely on.
        "-ffp-contract=off",
        "-fopenmp",
    ]
    if os.environ.get("REFRACT_PORTABLE_BUILD"):
        compile_args.remove("-march=native")
    ext_modules = cythonize(
        [
            Extension(
                "refract._mc_kernel",
                ["src/refract/_mc_kernel.pyx"],
                include_dirs=[numpy.get_include(), "src/refract"],
                extra_compile_args=compile_args,
                extra_link_args=["-fopenmp"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
