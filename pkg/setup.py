import os

from setuptools import Extension, setup

# the compiled kernel is optional: without Cython or a compiler the package
# falls back to the pure-Python kernel at import time
ext_modules = []
if os.environ.get("RESALLOC_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("resalloc._core", ["src/resalloc/_core.pyx"],
                       extra_compile_args=["-O3", "-ffp-contract=off"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
