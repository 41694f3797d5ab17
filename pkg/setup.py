from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "ballrec._kernel._core",
        ["src/ballrec/_kernel/_core.pyx"],
        language="c++",
        # Keep IEEE semantics so the compiled kernel is bit-identical to the
        # pure-Python fallback (no FMA contraction, no fast-math).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

if cythonize is not None:
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})
else:
    # Source tree without Cython: install pure-Python only.
    ext_modules = []

setup(ext_modules=ext_modules)
