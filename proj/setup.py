import os

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

# single-header dependencies: prefer an in-tree copy, else the system drop
vendor = "vendor" if os.path.exists("vendor/json.hpp") else "/opt/vendor"

ext = Pybind11Extension(
    "tagcorr._tagcorr",
    sources=[
        "python/bindings.cpp",
        "src/timebase.cpp",
        "src/simulator.cpp",
        "src/correlation.cpp",
        "src/clockstats.cpp",
        "src/sha256.cpp",
        "src/stream_io.cpp",
        "src/config.cpp",
        "src/manifest.cpp",
    ],
    include_dirs=["include", vendor],
    libraries=["fftw3"],
    cxx_std=20,
    define_macros=[("TAGCORR_VERSION", '"0.1.0"')],
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
