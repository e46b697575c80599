"""Dispatch to the numba or numpy kernel implementations.

The backend is fixed at import time by ``SPARSEDIST_NO_NUMBA``; both
implementations stay importable as ``numpy_kernels`` / ``numba_kernels``
for parity tests and benchmarks.
"""
from . import _kernels_numpy as numpy_kernels
from ._accel import HAVE_NUMBA, USE_NUMBA, backend_name

if HAVE_NUMBA:
    from . import _kernels_numba as numba_kernels
else:  # pragma: no cover
    numba_kernels = None

_impl = numba_kernels if USE_NUMBA else numpy_kernels

moments_1d = _impl.moments_1d
moments_2d = _impl.moments_2d
curve_moments_1d = _impl.curve_moments_1d
solve_1d = _impl.solve_1d
solve_2d = _impl.solve_2d
interp_grid_2d = _impl.interp_grid_2d
loo_cv_1d = _impl.loo_cv_1d
loo_cv_2d = _impl.loo_cv_2d
distance_matrix = _impl.distance_matrix
max_triangle_violation = _impl.max_triangle_violation
mds_loss_grad = _impl.mds_loss_grad

__all__ = [
    "backend_name",
    "numpy_kernels",
    "numba_kernels",
    "moments_1d",
    "moments_2d",
    "curve_moments_1d",
    "solve_1d",
    "solve_2d",
    "interp_grid_2d",
    "loo_cv_1d",
    "loo_cv_2d",
    "distance_matrix",
    "max_triangle_violation",
    "mds_loss_grad",
]
