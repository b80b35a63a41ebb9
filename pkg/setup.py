from setuptools import Extension, setup

import numpy

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# FP contraction off: the decoder must match the numpy fallback bit-for-bit.
extensions = [
    Extension(
        "spnkit._kernels",
        sources=["src/spnkit/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O2", "-ffp-contract=off"],
    ),
]

if cythonize is not None:
    ext_modules = cythonize(extensions, compiler_directives={"language_level": 3})
else:
    ext_modules = []

setup(ext_modules=ext_modules)
