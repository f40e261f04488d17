"""Build script for the optional compiled plant kernel.

The package works without the extension (a pure-Python kernel is selected
at import time), so any build failure here downgrades to a warning.
"""

import sys
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

EXT_ERRORS = (Exception,)

ext_modules = []
try:
    from Cython.Build import cythonize

    compile_args = []
    if not sys.platform.startswith("win"):
        # keep IEEE per-operation semantics so the compiled kernel matches
        # the pure-Python fallback bit for bit
        compile_args = ["-O3", "-ffp-contract=off"]

    ext_modules = cythonize(
        [
            Extension(
                "mapsched._plant_cy",
                ["src/mapsched/_plant_cy.pyx"],
                extra_compile_args=compile_args,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
        },
    )
except ImportError:
    warnings.warn("Cython unavailable; installing with the pure-Python plant kernel only")


class optional_build_ext(build_ext):
    """Never fail the install because the compiled kernel cannot be built."""

    def run(self):
        try:
            super().run()
        except EXT_ERRORS as exc:
            warnings.warn(f"compiled plant kernel skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except EXT_ERRORS as exc:
            warnings.warn(f"compiled plant kernel skipped: {exc}")


setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
