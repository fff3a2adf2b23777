"""Backend selection for the assembly kernels.

The compiled extension is used when it imports; ``STAGFV_BACKEND=python``
forces the NumPy fallback.  Callers go through the module attributes
(``kernels.dual_assembly``) so :func:`use_backend` takes effect globally.
"""
import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels_cy
except ImportError:  # extension not built
    _kernels_cy = None

_BACKENDS = {"python": _kernels_py}
if _kernels_cy is not None:
    _BACKENDS["cython"] = _kernels_cy

_API = ("cell_sum", "dual_fluxes", "dual_upwind", "dual_assembly")
backend = None


def available():
    return tuple(_BACKENDS)


def use_backend(name="auto"):
    """Bind the kernel functions of backend ``name``; return its name."""
    global backend
    if name == "auto":
        name = "cython" if "cython" in _BACKENDS else "python"
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} not available (have {available()})")
    mod = _BACKENDS[name]
    for fn in _API:
        globals()[fn] = getattr(mod, fn)
    backend = mod.NAME
    return backend


def as_c(a, dtype=np.float64):
    return np.ascontiguousarray(a, dtype=dtype)


use_backend(os.environ.get("STAGFV_BACKEND", "auto"))
