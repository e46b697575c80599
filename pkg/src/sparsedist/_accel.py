"""Backend selection for the numeric kernels.

Set ``SPARSEDIST_NO_NUMBA=1`` to force the pure-numpy path. When numba is
not importable the numpy path is used automatically.
"""
import os
import warnings

_DISABLED = os.environ.get("SPARSEDIST_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f

    if not _DISABLED:
        warnings.warn("numba is not installed; falling back to numpy kernels")

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
