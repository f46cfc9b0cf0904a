"""Select the kernel implementation at import time.

The compiled ``_kernels`` extension is preferred; setting the environment
variable ``KALMANFLOW_PURE_PYTHON=1`` forces the numpy fallback.
"""
import importlib
import os

_FORCE_PURE = os.environ.get("KALMANFLOW_PURE_PYTHON", "").strip() not in ("", "0")


def load(name):
    """Return the kernel module ``"cython"`` or ``"python"``."""
    if name == "cython":
        return importlib.import_module("kalmanflow._kernels")
    if name == "python":
        return importlib.import_module("kalmanflow._kernels_py")
    raise ValueError(f"unknown backend {name!r}")


def available():
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if _FORCE_PURE:
    kernels = load("python")
    BACKEND = "python"
else:
    try:
        kernels = load("cython")
        BACKEND = "cython"
    except ImportError:
        kernels = load("python")
        BACKEND = "python"
