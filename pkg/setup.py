import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernel links against numpy's static random-distribution
# library so that it draws from the exact same PCG64 normal stream as the
# pure-Python fallback.
randlib = os.path.join(os.path.dirname(np.__file__), "random", "lib")

ext = Extension(
    "nopasim._kernels._shots",
    ["src/nopasim/_kernels/_shots.pyx"],
    include_dirs=[np.get_include()],
    library_dirs=[randlib],
    libraries=["npyrandom"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3))
