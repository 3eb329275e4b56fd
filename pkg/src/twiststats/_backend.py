"""Backend selection for the hot kernels.

``TWISTSTATS_BACKEND=numpy`` forces the pure-numpy path even when numba is
importable; anything else (or unset) uses numba when available.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def backend_name():
    want = os.environ.get("TWISTSTATS_BACKEND", "numba").strip().lower()
    if want == "numpy" or not HAVE_NUMBA:
        return "numpy"
    return "numba"


def njit(func):
    """``numba.njit(cache=True)`` or identity when numba is missing."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def cache_dir():
    """Directory for on-disk tables (eigenvalue tables, remote records)."""
    path = os.environ.get("TWISTSTATS_CACHE_DIR")
    if not path:
        path = os.path.join(os.path.expanduser("~"), ".cache", "twiststats")
    os.makedirs(path, exist_ok=True)
    return path
