"""Backend selection for the compiled kernels.

Set ``EDPA_BACKEND=numpy`` to force the pure-numpy code paths even when
numba is importable. ``set_backend`` switches at runtime (tests, benchmarks).
"""
import os

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda func: func

_BACKENDS = ("numba", "numpy")
_backend = os.environ.get("EDPA_BACKEND", "numba").strip().lower() or "numba"
if _backend not in _BACKENDS:
    raise ValueError(f"EDPA_BACKEND must be one of {_BACKENDS}, got {_backend!r}")


def set_backend(name):
    """Select ``'numba'`` or ``'numpy'``; returns the previous choice."""
    global _backend
    if name not in _BACKENDS:
        raise ValueError(f"backend must be one of {_BACKENDS}")
    previous, _backend = _backend, name
    return previous


def backend():
    """The backend actually in use (numba falls back to numpy if missing)."""
    if _backend == "numba" and HAS_NUMBA:
        return "numba"
    return "numpy"


def use_numba():
    return backend() == "numba"


def worker_count(default=1):
    """Worker cap from ``EDPA_THREADS`` (at least 1)."""
    raw = os.environ.get("EDPA_THREADS")
    if not raw:
        return default
    return max(1, int(raw))
