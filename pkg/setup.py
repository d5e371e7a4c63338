import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("specgame._qkernel", ["src/specgame/_qkernel.pyx"])],
        language_level="3",
    )
except ImportError:
    extensions = []  # pure-Python fallback is selected at import

setup(
    ext_modules=extensions,
    include_dirs=[np.get_include()],
)
