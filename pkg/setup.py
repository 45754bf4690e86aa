import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("BOED_LAB_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "boed_lab._kernels",
                    ["src/boed_lab/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-ffast-math"],
                    extra_link_args=["-lmvec", "-lm"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # numpy fallback in boed_lab._kernels_py is picked up at import
        ext_modules = []

setup(ext_modules=ext_modules)
