"""Build script: compiles the optional C accelerator for the ROUGE kernels.

The package is fully functional without the extension; if Cython or a C
compiler is unavailable the build falls back to the pure-Python kernels.
Set LAYBENCH_PURE_PYTHON=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to the pure-Python kernels on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: C accelerator build skipped ({exc}); "
                  "laybench will use the pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "laybench will use the pure-Python kernels")


def extension_modules():
    if os.environ.get("LAYBENCH_PURE_PYTHON"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [Extension("laybench._kernels", ["src/laybench/_kernels.pyx"])],
        language_level=3,
    )


setup(ext_modules=extension_modules(), cmdclass={"build_ext": OptionalBuildExt})
