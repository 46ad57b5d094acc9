"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when it is
missing or when MIXEDCORR_PURE_PYTHON is set. Both expose the same
functions; `get_backend` lets benchmarks compare them side by side.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MIXEDCORR_PURE_PYTHON"):
    impl = _kernels_py
else:
    try:
        from . import _kernels_c as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _kernels_py

BACKEND: str = impl.BACKEND


def get_backend(name: str | None = None):
    """Return a kernel module: the active one, or 'c'/'python' explicitly."""
    if name is None:
        return impl
    if name == "python":
        return _kernels_py
    if name == "c":
        from . import _kernels_c
        return _kernels_c
    raise ValueError(f"unknown backend {name!r}")
