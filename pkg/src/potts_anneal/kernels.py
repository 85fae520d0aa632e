"""Backend selection for the hot loops.

The compiled ``_core`` extension is used when it was built; otherwise the
pure-Python ``_pycore`` module is used. Setting ``POTTS_ANNEAL_PURE_PYTHON=1``
forces the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pycore


def _load_compiled() -> ModuleType | None:
    try:
        from . import _core
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()

if _compiled is not None and os.environ.get("POTTS_ANNEAL_PURE_PYTHON", "") in ("", "0"):
    _active: ModuleType = _compiled
    BACKEND = "compiled"
else:
    _active = _pycore
    BACKEND = "python"


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return _active
    if name == "python":
        return _pycore
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels were not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def anneal(*args, backend: str | None = None, **kwargs):
    return get_backend(backend).anneal(*args, **kwargs)


def exhaustive_minimum(*args, backend: str | None = None, **kwargs):
    return get_backend(backend).exhaustive_minimum(*args, **kwargs)
