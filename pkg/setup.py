import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    extensions = []
else:
    extensions = cythonize(
        [
            Extension(
                "ria._jacobi",
                ["src/ria/_jacobi.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

# The compiled kernel is optional: ria falls back to the pure-numpy Jacobi
# sweep when the extension is missing (see ria.backend).
setup(ext_modules=extensions)
