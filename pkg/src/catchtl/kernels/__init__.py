"""Sampler sweep kernels with a compiled core and a pure-Python fallback.

The Cython extension ``catchtl.kernels._native`` is used when importable;
otherwise the NumPy reference implementation takes over. Selection happens
once at import and can be forced with the environment variable
``CATCHTL_KERNELS``:

    auto    compiled if available, else fallback (default)
    native  require the compiled extension, fail otherwise
    python  force the NumPy fallback

Both backends implement the same four functions with identical semantics.
They are equivalent in distribution but not bitwise (summation order and
libm differ), so a chain is reproducible given (seed, backend).
``active()`` reports which one is in use.
"""

from __future__ import annotations

import importlib
import os

from . import reference

_CHOICE = os.environ.get("CATCHTL_KERNELS", "auto").strip().lower()
if _CHOICE not in ("auto", "native", "python"):
    raise ImportError(
        f"CATCHTL_KERNELS must be one of auto/native/python, got {_CHOICE!r}"
    )

if _CHOICE == "python":
    _impl = reference
else:
    try:
        _impl = importlib.import_module("catchtl.kernels._native")
    except ImportError:
        if _CHOICE == "native":
            raise
        _impl = reference

BACKEND: str = _impl.BACKEND
abundance_sweep = _impl.abundance_sweep
detect_effects_sweep = _impl.detect_effects_sweep
log_mean_sweep = _impl.log_mean_sweep
coeff_block_step = _impl.coeff_block_step


def active() -> str:
    """Name of the backend in use: 'native' or 'python'."""
    return BACKEND


def get_backend(name: str):
    """Return a specific backend module ('native' or 'python'); for tests/benchmarks."""
    if name == "python":
        return reference
    if name == "native":
        return importlib.import_module("catchtl.kernels._native")
    raise ValueError(f"unknown kernel backend {name!r}")
