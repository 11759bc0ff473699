"""Numba switch.

Set ``EM0_NUMBA=0`` to force the pure-numpy kernels.  Numba is also skipped
when it cannot be imported.
"""

import os


def _numba_requested() -> bool:
    return os.environ.get("EM0_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_requested() and _numba_available()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, else the identity decorator."""
    if _numba_available():
        import numba
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda fn: fn
