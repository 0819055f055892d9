# Builds the optional compiled substep kernel. The package works without it
# (multigait.kernels falls back to the pure-Python reference implementation),
# so the extension is marked optional and a failed compile is not fatal.
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext = Extension(
        "multigait._speedups",
        sources=["src/multigait/_speedups.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off keeps the compiled kernel bit-identical to the
        # pure-Python reference (no FMA contraction).
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
