"""Pooled local linear smoothers with Epanechnikov kernels.

The 1-D smoother fits a local line at each grid point and the 2-D smoother
a local plane at each grid node; both return the fitted intercept. Sample
sets are kept as flat arrays grouped by curve so that leave-one-curve-out
cross validation can subtract a curve's contribution from the pooled
moment sums instead of refitting.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateNeighborhood, NoValidBandwidth, ValidationError


@dataclass(frozen=True)
class Grid:
    """Equispaced evaluation grid on ``[lower, upper]`` with ``m`` points."""

    lower: float
    upper: float
    m: int = 51

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)) or not self.lower < self.upper:
            raise ValidationError(f"grid needs lower < upper, got [{self.lower}, {self.upper}]")
        if int(self.m) != self.m or self.m < 2:
            raise ValidationError(f"grid needs m >= 2 points, got {self.m}")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, int(self.m))

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.m - 1)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(int(self.m), self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        return np.tensordot(values, self.trapezoid_weights(), axes=([axis], [0]))

    def interp(self, values: np.ndarray, t) -> np.ndarray:
        """Piecewise-linear interpolation; times outside the grid clamp to the ends."""
        return np.interp(np.asarray(t, dtype=float), self.points, values)

    @classmethod
    def covering(cls, times: Iterable[float], m: int = 51) -> "Grid":
        t = np.fromiter(times, dtype=float)
        return cls(float(t.min()), float(t.max()), m)


@dataclass(frozen=True)
class KernelSpec:
    family: Literal["epanechnikov_1d", "epanechnikov_2d"] = "epanechnikov_1d"

    def __call__(self, u, v=None):
        if self.family == "epanechnikov_1d":
            return kernel_eval_1d(u)
        return kernel_eval_2d(u, v)


def kernel_eval_1d(u):
    """Epanechnikov weight ``3/4 (1 - u^2)`` on ``[-1, 1]``, zero outside."""
    u = np.asarray(u, dtype=float)
    w = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    return float(w) if w.ndim == 0 else w


def kernel_eval_2d(u, v):
    """Product Epanechnikov weight ``9/16 (1 - u^2)(1 - v^2)`` on the unit square."""
    w = np.asarray(kernel_eval_1d(u)) * np.asarray(kernel_eval_1d(v))
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class Samples1D:
    """Pooled ``(t, y)`` pairs stored curve by curve.

    ``offsets[c]:offsets[c + 1]`` indexes the samples of curve ``c``.
    """

    t: np.ndarray
    y: np.ndarray
    offsets: np.ndarray

    def __len__(self):
        return int(self.t.shape[0])

    @property
    def n_curves(self) -> int:
        return int(self.offsets.shape[0] - 1)

    @property
    def curve_id(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_curves), np.diff(self.offsets))

    @classmethod
    def from_arrays(cls, t, y, curve_id=None) -> "Samples1D":
        t = np.asarray(t, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if t.shape != y.shape:
            raise ValidationError("t and y must have the same length")
        if curve_id is None:
            curve_id = np.arange(t.shape[0])
        order, offsets = _group(np.asarray(curve_id))
        return cls(t[order], y[order], offsets)


@dataclass(frozen=True)
class Samples2D:
    """Pooled off-diagonal raw covariances ``g`` at ``(s, t)``, curve by curve."""

    s: np.ndarray
    t: np.ndarray
    g: np.ndarray
    offsets: np.ndarray

    def __len__(self):
        return int(self.s.shape[0])

    @property
    def n_curves(self) -> int:
        return int(self.offsets.shape[0] - 1)

    @classmethod
    def from_arrays(cls, s, t, g, curve_id=None) -> "Samples2D":
        s = np.asarray(s, dtype=float).ravel()
        t = np.asarray(t, dtype=float).ravel()
        g = np.asarray(g, dtype=float).ravel()
        if not s.shape == t.shape == g.shape:
            raise ValidationError("s, t and g must have the same length")
        if curve_id is None:
            curve_id = np.arange(s.shape[0])
        order, offsets = _group(np.asarray(curve_id))
        return cls(s[order], t[order], g[order], offsets)


def _group(curve_id):
    order = np.argsort(curve_id, kind="stable")
    _, counts = np.unique(curve_id[order], return_counts=True)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return order, offsets


def _check_h(h):
    if not (np.isfinite(h) and h > 0):
        raise ValidationError(f"bandwidth must be positive, got {h}")


def local_linear_1d(samples: Samples1D, h: float, grid: Grid) -> np.ndarray:
    """Local linear intercepts on ``grid``.

    Raises
    ------
    DegenerateNeighborhood
        If the weighted design is singular at any grid point.
    """
    _check_h(h)
    if len(samples) == 0:
        raise DegenerateNeighborhood("no samples to smooth")
    mom = kernels.moments_1d(samples.t, samples.y, grid.points, float(h))
    beta, bad = kernels.solve_1d(mom)
    if bad.any():
        where = grid.points[bad]
        raise DegenerateNeighborhood(
            f"bandwidth {h:g} leaves {bad.sum()} grid point(s) without a local line fit "
            f"(first at t={where[0]:g})"
        )
    return beta


def local_linear_2d(samples: Samples2D, h: float, grid: Grid) -> np.ndarray:
    """Local plane intercepts on ``grid x grid``, symmetrized."""
    _check_h(h)
    if len(samples) == 0:
        raise DegenerateNeighborhood("no raw covariance samples to smooth")
    mom = kernels.moments_2d(samples.s, samples.t, samples.g, grid.points, float(h))
    beta, bad = kernels.solve_2d(mom)
    if bad.any():
        a, b = np.argwhere(bad)[0]
        raise DegenerateNeighborhood(
            f"bandwidth {h:g} leaves {bad.sum()} grid node(s) without a local plane fit "
            f"(first at ({grid.points[a]:g}, {grid.points[b]:g}))"
        )
    return 0.5 * (beta + beta.T)


def cv_score_1d(samples: Samples1D, h: float, grid: Grid) -> float:
    """Leave-one-curve-out sum of squared prediction errors (inf if degenerate)."""
    _check_h(h)
    sse, bad = kernels.loo_cv_1d(samples.t, samples.y, samples.offsets, grid.points, float(h))
    return np.inf if bad else float(sse)


def cv_score_2d(samples: Samples2D, h: float, grid: Grid) -> float:
    _check_h(h)
    sse, bad = kernels.loo_cv_2d(samples.s, samples.t, samples.g, samples.offsets, grid.points, float(h))
    return np.inf if bad else float(sse)


def default_candidates(times, width: float, n: int = 15) -> np.ndarray:
    """Log-spaced bandwidths from the largest pooled time gap up to ``width``.

    Windows narrower than the largest gap leave some grid point without
    data, so the lower end is floored at that gap (and at ``width / 100``).
    """
    t = np.sort(np.asarray(times, dtype=float))
    gap = float(np.max(np.diff(t))) if t.size > 1 else width / 10.0
    lo = min(max(gap, width / 100.0), width)
    return np.geomspace(lo, width, n)


def _pick(candidates, scores, energy=0.0):
    scores = np.asarray(scores, dtype=float)
    if not np.isfinite(scores).any():
        raise NoValidBandwidth(f"all {len(candidates)} bandwidth candidates are degenerate")
    best = np.min(scores[np.isfinite(scores)])
    # ties (up to rounding relative to the response energy) go to the smallest bandwidth
    tol = 1e-10 * best + 1e-24 * energy
    tied = [h for h, sc in zip(candidates, scores) if sc <= best + tol]
    return float(min(tied))


def _traj_samples_1d(trajectories, target, grid, mean):
    t = [np.asarray(tr.times, dtype=float) for tr in trajectories]
    y = [np.asarray(tr.values, dtype=float) for tr in trajectories]
    if target == "diagonal":
        if mean is None:
            raise ValidationError("target='diagonal' needs the fitted mean curve")
        y = [(yi - grid.interp(mean, ti)) ** 2 for ti, yi in zip(t, y)]
    elif target != "mean":
        raise ValidationError(f"unknown CV target {target!r}")
    offsets = np.concatenate([[0], np.cumsum([len(ti) for ti in t])]).astype(np.int64)
    return Samples1D(np.concatenate(t), np.concatenate(y), offsets)


def cv_bandwidth_1d(
    trajectories: Sequence,
    candidates: Sequence[float] | None = None,
    target: Literal["mean", "diagonal"] = "mean",
    grid: Grid | None = None,
    mean: np.ndarray | None = None,
    return_scores: bool = False,
):
    """Choose a 1-D bandwidth by leave-one-curve-out cross validation.

    Parameters
    ----------
    trajectories : sequence of SparseTrajectory
        At least two curves.
    candidates : sequence of float, optional
        Bandwidths to try; defaults to :func:`default_candidates`.
    target : {'mean', 'diagonal'}
        Smooth the observations themselves, or the squared residuals from
        ``mean`` (the diagonal of the raw covariance).
    grid : Grid, optional
        Evaluation grid; defaults to 51 points over the observed times.
    mean : ndarray, optional
        Mean curve on ``grid``; required for ``target='diagonal'``.
    return_scores : bool
        Also return the list of CV scores (``inf`` marks skipped candidates).
    """
    if len(trajectories) < 2:
        raise ValidationError("cross validation needs at least two trajectories")
    if grid is None:
        grid = Grid.covering(np.concatenate([tr.times for tr in trajectories]))
    samples = _traj_samples_1d(trajectories, target, grid, mean)
    if candidates is None:
        candidates = default_candidates(samples.t, grid.width)
    candidates = [float(h) for h in candidates]
    if not candidates:
        raise ValidationError("no bandwidth candidates given")
    scores = [cv_score_1d(samples, h, grid) for h in candidates]
    best = _pick(candidates, scores, float(np.sum(samples.y ** 2)))
    return (best, scores) if return_scores else best


def cv_bandwidth_2d(
    trajectories: Sequence,
    candidates: Sequence[float] | None = None,
    grid: Grid | None = None,
    mean: np.ndarray | None = None,
    samples: Samples2D | None = None,
    return_scores: bool = False,
):
    """Choose the covariance bandwidth by leave-one-curve-out cross validation.

    The targets are the off-diagonal raw covariances; pass ``samples`` to
    reuse precomputed ones, otherwise they are built from ``trajectories``
    and ``mean`` (zero mean if omitted).
    """
    if len(trajectories) < 2:
        raise ValidationError("cross validation needs at least two trajectories")
    if grid is None:
        grid = Grid.covering(np.concatenate([tr.times for tr in trajectories]))
    if samples is None:
        from .fpca import raw_covariances

        samples = raw_covariances(trajectories, np.zeros(grid.m) if mean is None else mean, grid)
    if candidates is None:
        candidates = default_candidates(np.concatenate([tr.times for tr in trajectories]), grid.width)
    candidates = [float(h) for h in candidates]
    if not candidates:
        raise ValidationError("no bandwidth candidates given")
    scores = [cv_score_2d(samples, h, grid) for h in candidates]
    best = _pick(candidates, scores, float(np.sum(samples.g ** 2)))
    return (best, scores) if return_scores else best
