import os

import numpy
from setuptools import setup
from setuptools.extension import Extension

extensions = []
if os.environ.get("SCALEMIX_SKIP_EXT", "0") != "1":
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "scalemix._core",
                ["src/scalemix/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
