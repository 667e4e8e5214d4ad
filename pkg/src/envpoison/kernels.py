"""Backend selection for the hot loops.

The compiled extension ``envpoison._kernels`` is used when importable;
otherwise, or when the environment variable ``ENVPOISON_PURE_PYTHON`` is
set to a non-empty value other than ``0``, the numpy fallback is used.
"""
import importlib
import os

from . import _kernels_py

_FORCE_PY = os.environ.get("ENVPOISON_PURE_PYTHON", "") not in ("", "0")


def _load_compiled():
    try:
        return importlib.import_module("envpoison._kernels")
    except ImportError:
        return None


_compiled = None if _FORCE_PY else _load_compiled()
backend = _compiled if _compiled is not None else _kernels_py
BACKEND_NAME = "compiled" if _compiled is not None else "python"


def get_backend(name=None):
    """Module for ``name`` in {"compiled", "python"}; None returns the active one."""
    if name is None:
        return backend
    if name == "python":
        return _kernels_py
    if name == "compiled":
        mod = _compiled or _load_compiled()
        if mod is None:
            raise ImportError("compiled kernels are not built")
        return mod
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    return (_compiled or _load_compiled()) is not None


def evi(*args, **kw):
    return backend.evi(*args, **kw)


def run_segment(*args, **kw):
    return backend.run_segment(*args, **kw)


def dykstra(*args, **kw):
    return backend.dykstra(*args, **kw)
