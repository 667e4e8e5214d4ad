"""Builds the optional compiled kernels; the package works without them."""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("envpoison._kernels", ["src/envpoison/_kernels.pyx"],
                   include_dirs=[np.get_include()], optional=True)],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
