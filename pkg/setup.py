import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

compile_args = ["-O3", "-ffp-contract=off", "-fno-fast-math", "-fno-trapping-math", "-fopenmp"]
march = os.environ.get("MIXEDPREC_CFD_MARCH", "native")
if march:
    compile_args.append(f"-march={march}")

extensions = [
    Extension(
        "mixedprec_cfd.kernels._ccore",
        ["src/mixedprec_cfd/kernels/_ccore.pyx"],
        include_dirs=[np.get_include(), "src/mixedprec_cfd/kernels"],
        extra_compile_args=compile_args,
        extra_link_args=["-fopenmp"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
