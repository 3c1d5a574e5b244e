"""Build script: compiles the optional kernel extension.

The package works without the extension (a pure-Python twin is selected at
import time), so any compile failure downgrades to a warning instead of
aborting the install.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class _OptionalBuildExt(build_ext):
    """Skip the extension, with a warning, when no working C toolchain exists."""

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

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the compiled kernels failed ({exc!r}); "
            "streamcore will run on the pure-Python backend.",
            file=sys.stderr,
        )


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    # -ffp-contract=off: the pure-Python twin must stay bit-identical, and a
    # fused multiply-add would round differently from CPython's float ops.
    ext = Extension(
        "streamcore._kernels._speedups",
        ["src/streamcore/_kernels/_speedups.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions(), cmdclass={"build_ext": _OptionalBuildExt})
