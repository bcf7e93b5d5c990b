import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # No Cython: install pure-python only; suntrack.backend falls back at import.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "suntrack._kernels",
                ["src/suntrack/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
