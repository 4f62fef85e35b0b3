"""Backend selection for the trajectory kernels.

The compiled extension is used when it imports; otherwise the pure-Python
reference implementation.  Set ``POINTER_COLLAPSE_BACKEND=python`` to force
the fallback.  Both expose ``simulate_outcomes`` and ``escape_flags`` with
identical signatures and identical results.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("compiled", "python")


def available() -> list[str]:
    return [name for name in BACKENDS if name == "python" or _compiled is not None]


def get_backend(name: str | None = None) -> ModuleType:
    name = name or os.environ.get("POINTER_COLLAPSE_BACKEND") or ("compiled" if _compiled else "python")
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}; choose from {BACKENDS}")


def backend_name(module: ModuleType) -> str:
    return "compiled" if module is _compiled and _compiled is not None else "python"
