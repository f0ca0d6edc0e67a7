import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pcrtbp._core",
                ["src/pcrtbp/_core.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # The package runs on the pure-Python kernels when the extension is absent.
    ext_modules = []

setup(ext_modules=ext_modules)
