"""Optional numba acceleration.

Set ``PRYMLAB_DISABLE_NUMBA=1`` to force the pure-numpy code paths.  Kernels
decorated with :func:`njit` fall back to plain Python functions when numba is
missing or disabled; callers pick the vectorised numpy implementation instead
via :data:`USE_NUMBA`.
"""
import os

_disabled = os.environ.get("PRYMLAB_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

def max_threads():
    """Thread cap from ``PRYMLAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("PRYMLAB_THREADS", "1")))
    except ValueError:
        return 1


# must precede the numba import to take effect
os.environ.setdefault("NUMBA_NUM_THREADS", str(max_threads()))

try:
    if _disabled:
        raise ImportError
    import numba

    USE_NUMBA = True

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("fastmath", False)
        return numba.njit(*args, **kwargs)

except ImportError:  # pragma: no cover - exercised via env flag
    USE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
