"""Build the optional compiled kernel extension.

The package works without it (a numpy fallback is selected at import time);
building it is what gets the simulator past the real-time throughput targets.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "cribsim.kernels._core_c",
        sources=["src/cribsim/kernels/_core_c.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    # No Cython available: install pure-python only.
    ext_modules = []

setup(ext_modules=ext_modules)
