"""Numba availability and the environment switch that turns it off.

Set ``TOPOPHASE_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels, even when numba is installed.
"""
import os

_FALSE = ("", "0", "false", "no", "off")

DISABLED_BY_ENV = os.environ.get("TOPOPHASE_DISABLE_NUMBA", "0").strip().lower() not in _FALSE

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is optional
    _numba = None

USE_NUMBA = _numba is not None and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is active, identity decorator otherwise."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


_THREADS = [None]


def set_threads(n):
    """Worker count for FFTs (the numba kernels are serial)."""
    _THREADS[0] = int(n) if n else None


def get_threads():
    return _THREADS[0]


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
