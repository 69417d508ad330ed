"""Kernel backend selection.

Two interchangeable backends implement the numeric hot paths: a compiled
Cython extension (``_cykernels``) and a pure-NumPy fallback (``pyback``).
The compiled backend is preferred when importable; ``RECALL_FORGE_BACKEND``
(``cython`` or ``python``) forces the choice.  All consumers call through
the module-level wrappers below, so :func:`use` can swap backends at
runtime (tests and the benchmark rely on this).
"""

from __future__ import annotations

import os
from types import ModuleType

from ..errors import ArgumentError
from . import pyback

try:
    from . import _cykernels  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - build-environment dependent
    _cykernels = None

_BACKENDS: dict[str, ModuleType] = {"python": pyback}
if _cykernels is not None:
    _BACKENDS["cython"] = _cykernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _default_backend() -> ModuleType:
    forced = os.environ.get("RECALL_FORGE_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise ArgumentError(
                f"RECALL_FORGE_BACKEND={forced!r} not available; "
                f"choose from {available_backends()}")
        return _BACKENDS[forced]
    return _BACKENDS.get("cython", pyback)


_active = _default_backend()


def use(name: str) -> None:
    """Select the active backend by name ('python' or 'cython')."""
    global _active
    if name not in _BACKENDS:
        raise ArgumentError(
            f"unknown backend {name!r}; choose from {available_backends()}")
    _active = _BACKENDS[name]


def active_name() -> str:
    return _active.NAME


def tower_forward(x, weights, biases):
    return _active.tower_forward(x, weights, biases)


def tower_backward(x, weights, acts, d_out):
    return _active.tower_backward(x, weights, acts, d_out)


def normalize_rows(z):
    return _active.normalize_rows(z)


def normalize_rows_backward(zhat, norms, d_zhat):
    return _active.normalize_rows_backward(zhat, norms, d_zhat)


def matmul_nn(a, b):
    return _active.matmul_nn(a, b)


def matmul_nt(a, b):
    return _active.matmul_nt(a, b)


def matmul_tn(a, b):
    return _active.matmul_tn(a, b)
