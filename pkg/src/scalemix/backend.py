"""Kernel backend selection.

The hot kernels exist twice: a Cython extension (``scalemix._core``) and a
pure-Python/NumPy twin (``scalemix._core_py``).  The compiled module is used
when importable; set ``SCALEMIX_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _core_py

if os.environ.get("SCALEMIX_PURE_PYTHON", "0") == "1":
    core = _core_py
else:
    try:
        from . import _core as core  # type: ignore[no-redef]
    except ImportError:
        core = _core_py


def active_backend() -> str:
    """Name of the kernel implementation in use: 'cython' or 'python'."""
    return core.IMPL
