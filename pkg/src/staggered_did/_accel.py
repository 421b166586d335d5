"""Optional numba acceleration.

Set ``STAGGERED_DID_NUMPY=1`` to force the pure-numpy kernels even when
numba is importable.
"""

import os

_FLAG = os.environ.get("STAGGERED_DID_NUMPY", "").strip().lower()
FORCE_NUMPY = _FLAG not in ("", "0", "false", "no")

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not FORCE_NUMPY


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged."""
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(cache=True)(func)
