"""Backend selection for the hot kernels.

Set ``QWALK_DISABLE_NUMBA=1`` before import to force the pure-numpy code
paths even when numba is installed.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("QWALK_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if _numba is None:
        return fn
    return _numba.njit(cache=True)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
