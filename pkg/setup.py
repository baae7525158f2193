from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("pearl._solver_cy", ["src/pearl/_solver_cy.pyx"])],
        language_level="3",
    )
except ImportError:
    # No Cython: install pure-Python only, the solver falls back at import.
    extensions = []

setup(ext_modules=extensions)
