"""Build hook for the optional compiled kernels.

``optional=True`` keeps the install working when no compiler is available;
the package then runs on the pure-Python kernels.
"""
import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "frag_avalanche.montecarlo._ckernels",
        ["src/frag_avalanche/montecarlo/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        language="c++",
        extra_compile_args=["-O2"],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}))
