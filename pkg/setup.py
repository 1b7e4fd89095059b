from setuptools import Extension, setup

# The compiled kernel is optional: the package falls back to the numpy
# implementation in arrivalq._march_py when the extension is absent.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "arrivalq._march",
                ["src/arrivalq/_march.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
