from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # numpy fallback kernels are used instead
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("spinwave_photon._ckernels", ["src/spinwave_photon/_ckernels.pyx"], optional=True)],
        language_level=3,
    )

setup(ext_modules=ext_modules)
