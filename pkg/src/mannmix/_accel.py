"""Numba switch.

Hot loops are written once as plain Python over scalars and compiled with
``numba.njit`` when available.  Setting ``MANNMIX_DISABLE_NUMBA=1`` (or not
having numba installed) selects the pure-numpy fallback kernels instead.
``MANNMIX_THREADS`` fixes the worker count used by the replication engine.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and not _env_flag("MANNMIX_DISABLE_NUMBA")


def _noop(*args, **kwargs):
    # supports both @njit and @njit(...)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


if USE_NUMBA:
    njit = _numba.njit
else:
    njit = _noop


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def default_threads():
    """Worker count from ``MANNMIX_THREADS``, else the CPU count."""
    raw = os.environ.get("MANNMIX_THREADS", "").strip()
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError("MANNMIX_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def jit_callable(f):
    """Return a numba-compiled version of ``f`` or None if it cannot be compiled."""
    if not USE_NUMBA:
        return None
    if isinstance(f, _numba.core.registry.CPUDispatcher):
        return f
    try:
        g = _numba.njit(f)
        g(0.5)  # force compilation so typing errors surface here
    except Exception:
        return None
    return g
