"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``CIRCDIFF_BACKEND``:

* ``numba`` (default) - compiled kernels; falls back to numpy (with a warning) if
  numba cannot be imported.
* ``numpy`` - vectorised reference implementations.

Both backends expose the same functions and agree to rounding error, which
the test-suite checks directly through :func:`get_backend`.
"""

from __future__ import annotations

import importlib
import os
import warnings
from types import ModuleType

_NAMES = ("numba", "numpy")
_cache: dict[str, ModuleType] = {}


def get_backend(name: str) -> ModuleType:
    """Return the kernel module for ``name`` ("numba" or "numpy")."""
    name = name.strip().lower()
    if name not in _NAMES:
        raise ValueError(f"unknown kernel backend {name!r}; expected one of {_NAMES}")
    if name not in _cache:
        _cache[name] = importlib.import_module(f".{name}_impl", __name__)
    return _cache[name]


def _select() -> tuple[str, ModuleType]:
    requested = os.environ.get("CIRCDIFF_BACKEND", "numba").strip().lower() or "numba"
    if requested == "numba":
        try:
            return "numba", get_backend("numba")
        except ImportError:
            warnings.warn("numba is not installed - falling back to numpy kernels", stacklevel=2)
            return "numpy", get_backend("numpy")
    return requested, get_backend(requested)


BACKEND, _impl = _select()

wrap = _impl.wrap
euler_vm = _impl.euler_vm
log_wrapped_normal = _impl.log_wrapped_normal
log_smooth_norm = _impl.log_smooth_norm
cn_march = _impl.cn_march

__all__ = [
    "BACKEND",
    "get_backend",
    "wrap",
    "euler_vm",
    "log_wrapped_normal",
    "log_smooth_norm",
    "cn_march",
]
