"""Numba switch.

Kernels are written once in a numba-compatible numpy subset. ``jit`` compiles
them with ``numba.njit`` unless ``PANICREG_DISABLE_NUMBA`` is set to a truthy
value (or numba is missing), in which case the plain numpy functions run.
"""
import os

try:
    import numba
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    numba = None
    NUMBA_AVAILABLE = False

_FLAG = os.environ.get("PANICREG_DISABLE_NUMBA", "").strip().lower()
ENABLE_NUMBA = NUMBA_AVAILABLE and _FLAG in ("", "0", "false", "no")
CACHE_NUMBA = True


def identity(func):
    return func


def njit(func):
    return numba.njit(cache=CACHE_NUMBA)(func)


jit = njit if ENABLE_NUMBA else identity
