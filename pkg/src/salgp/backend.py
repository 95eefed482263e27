"""Numeric backend selection.

The hot per-candidate kernels exist twice: a Cython extension
(``salgp._kernels``) and a NumPy fallback (``salgp._kernels_py``).  The
extension is used when it imported successfully; set ``SALGP_PURE_PYTHON=1``
to force the fallback (the benchmark suite does this to compare the two).
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("SALGP_PURE_PYTHON"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py


def backend_name():
    """Name of the active backend: ``"cython"`` or ``"python"``."""
    return kernels.BACKEND_NAME


def get_backend(name=None):
    """Return a backend module by name (``None`` means the active one)."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels  # noqa: F811

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
