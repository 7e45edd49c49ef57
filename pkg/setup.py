"""Build script: compiles the optional Cython kernel extension.

The extension is a pure accelerator. If Cython or a C compiler is missing,
or the compile fails, the install proceeds without it and dhjlab.kernels
selects the numpy fallback at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "dhjlab._ckernels",
                ["src/dhjlab/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - environment dependent
    print(f"dhjlab: skipping compiled kernels ({exc!r}); numpy fallback will be used")

setup(ext_modules=ext_modules)
