import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "mhnet.kernels._cykernels",
                ["src/mhnet/kernels/_cykernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Pure-python install still works; mhnet.kernels falls back to numpy.
    extensions = []

setup(ext_modules=extensions)
