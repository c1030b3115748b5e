import numpy
from Cython.Build import cythonize
from setuptools import setup

setup(
    ext_modules=cythonize(
        ["src/fleetmpc/geometry/_satcy.pyx"],
        language_level=3,
    ),
    include_dirs=[numpy.get_include()],
)
