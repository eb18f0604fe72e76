"""Build script: compiles the optional Cython kernel extension.

The extension is a pure speedup; if the build fails (no compiler, no
Cython) the package installs anyway and falls back to the numpy kernels
at import time.
"""

import sys
from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Swallow extension build failures and continue pure-Python."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the kgeaffine C kernels failed ({exc}); "
            "installing with the pure-numpy fallback.",
            file=sys.stderr,
        )


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"WARNING: {exc}; skipping C kernels.", file=sys.stderr)
        return []
    ext = Extension(
        "kgeaffine.kernels._ckernels",
        ["src/kgeaffine/kernels/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
        },
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
