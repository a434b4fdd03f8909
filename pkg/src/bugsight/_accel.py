"""Numba switch.

Hot kernels are written twice: a numba ``@njit`` loop and a vectorised numpy
version.  ``BUGSIGHT_NUMBA=0`` (or a missing numba install) selects numpy.
Both paths must give bit-identical output; tests enforce it.
"""
import os

_flag = os.environ.get("BUGSIGHT_NUMBA", "1").strip().lower()
_wanted = _flag not in ("0", "false", "no", "off")

try:
    if not _wanted:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _njit is not None:
        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
