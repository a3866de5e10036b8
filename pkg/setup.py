"""Build script: compiles the optional fast-kernel extension.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time), so a failed compilation only
costs speed, never correctness.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; fall back to pure Python otherwise."""

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # compiler missing, broken toolchain, ...
            warnings.warn(
                f"could not build {ext.name} ({exc!r}); "
                "the pure-Python kernels will be used"
            )


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; the pure-Python kernels will be used")
        return []
    ext = Extension(
        "gdaport._kernels._core",
        ["src/gdaport/_kernels/_core.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
