"""Optional numba acceleration.

Set ``VIBRODIAG_NUMBA=0`` before import to force the pure-numpy kernels.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("VIBRODIAG_NUMBA", "1").lower() not in ("0", "false", "no", "off")


def optional_njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise returns the function untouched."""
    kwargs.setdefault("cache", True)

    def decorator(func):
        if numba is None:
            return func
        return numba.njit(*args, **kwargs)(func)

    return decorator


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
