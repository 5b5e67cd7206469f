"""Select between numba-compiled kernels and the pure-numpy fallback.

Set ``FILTERSCALE_NO_NUMBA=1`` to force the numpy path (useful for
debugging or platforms without a working LLVM).
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("FILTERSCALE_NO_NUMBA", "").lower() in _FALSEY


def njit(fn):
    """Compile ``fn`` with numba if available; otherwise return it unchanged."""
    if not HAVE_NUMBA:
        return fn
    from numba import njit as _njit

    return _njit(cache=True, nogil=True)(fn)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
