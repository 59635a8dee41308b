"""Kernel backend selection: the compiled Cython extension when importable,
otherwise the pure-numpy fallback.  ``ACFDET_BACKEND=python|compiled`` forces
a choice; both backends produce bit-identical results."""

from __future__ import annotations

import os

from . import _kernels_py
from .errors import ConfigError

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built; fallback only
    _compiled = None


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _compiled is not None else ("python",)


def get_backend(name: str | None = None):
    """Return the kernel module for `name` (default: env override, then the
    fastest available)."""
    if name is None:
        name = os.environ.get("ACFDET_BACKEND")
    if name is None:
        return _compiled if _compiled is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ConfigError("compiled kernel backend requested but the extension is not built")
        return _compiled
    raise ConfigError(f"unknown kernel backend {name!r}")


def backend_name(backend=None) -> str:
    return (backend or get_backend()).BACKEND_NAME
