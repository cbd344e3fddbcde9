"""Backend selection for the sampling kernels.

The compiled extension is used when it imports; otherwise, or when
``PBITNQS_PURE_PYTHON=1`` is set, the pure-Python twin takes over.
"""
import importlib
import logging
import os

log = logging.getLogger(__name__)


def load_backend(name):
    if name == "compiled":
        return importlib.import_module("pbitnqs._kernels")
    if name == "python":
        return importlib.import_module("pbitnqs._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    out = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        out.insert(0, "compiled")
    return out


def _select():
    if os.environ.get("PBITNQS_PURE_PYTHON", "") not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "compiled", load_backend("compiled")
    except ImportError:
        log.warning("compiled kernels unavailable; using the pure-Python fallback")
        return "python", load_backend("python")


BACKEND, impl = _select()
