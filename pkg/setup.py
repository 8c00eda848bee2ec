"""Builds the optional OpenMP particle kernels; the package works without them."""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    def _warn(self, exc):
        sys.stderr.write(f"warning: compiled kernels not built ({exc}); using the NumPy fallback\n")


def extensions():
    if os.environ.get("VSHELL_NO_EXTENSION"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    flags = ["-O3", "-ffp-contract=off", "-fno-fast-math"]
    openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
    ext = Extension(
        "vshell.dynamics._kernels",
        ["src/vshell/dynamics/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=flags + openmp,
        extra_link_args=openmp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
