import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("BIMROBO_NO_EXT"):
    try:
        from Cython.Build import cythonize
        import numpy as np
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "bimrobo._kernels._ext",
                    ["src/bimrobo/_kernels/_ext.pyx"],
                    include_dirs=[np.get_include()],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
