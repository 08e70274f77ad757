"""Optional numba acceleration.

Set ``MSTDOA_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
"""
import os

_DISABLED = os.environ.get("MSTDOA_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def jit(func):
    """``njit(cache=True)`` when numba is available, else the identity."""
    if _njit is None:
        return func
    return _njit(cache=True)(func)


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
