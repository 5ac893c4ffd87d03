"""Backend selection for the hot kernels.

Every kernel exists twice: a loop-level version compiled with numba, and a
vectorized pure-numpy version. ``RANDUTV_DISABLE_NUMBA=1`` (or numba missing)
selects the numpy path at import time.
"""
import os

_FLAG = os.environ.get("RANDUTV_DISABLE_NUMBA", "").strip().lower()

try:
    if _FLAG in {"1", "true", "yes", "on"}:
        raise ImportError("numba disabled by RANDUTV_DISABLE_NUMBA")
    import numba
    USE_NUMBA = True
except ImportError:
    numba = None
    USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def kernel(fallback):
    """Compile the decorated loop kernel, or return `fallback` when numba is off.

    Compiled kernels release the GIL so scheduler workers run them in parallel.
    """
    def deco(fn):
        if USE_NUMBA:
            return numba.njit(cache=True, nogil=True)(fn)
        return fallback
    return deco
