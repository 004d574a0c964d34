"""Kernel backend selection.

The compiled kernels are used when the extension imported cleanly, unless
``FRAG_AVALANCHE_BACKEND=python`` is set.  ``compiled`` makes a missing
extension an import-time error instead of a silent fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

ENV_VAR = "FRAG_AVALANCHE_BACKEND"
CHOICES = ("auto", "python", "compiled")

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None


def _select(choice: str) -> tuple[str, ModuleType]:
    choice = choice.strip().lower() or "auto"
    if choice not in CHOICES:
        raise ValueError(f"{ENV_VAR} must be one of {CHOICES}, got {choice!r}")
    if choice == "python":
        return "python", _pykernels
    if _ckernels is None:
        if choice == "compiled":
            raise ImportError("compiled kernels requested but the extension is not built")
        return "python", _pykernels
    return "compiled", _ckernels


BACKEND, _active = _select(os.environ.get(ENV_VAR, "auto"))


def compiled_available() -> bool:
    return _ckernels is not None


def kernels(name: str | None = None) -> ModuleType:
    """Kernel module for ``name`` (``None`` means the active backend)."""
    if name is None:
        return _active
    return _select(name)[1]


def use_backend(name: str) -> str:
    """Switch the active backend for this process; returns the previous name."""
    global BACKEND, _active
    previous = BACKEND
    BACKEND, _active = _select(name)
    return previous
