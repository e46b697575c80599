"""Sparse functional PCA: mean, covariance, noise variance and eigenpairs.

The fitted model feeds :func:`conditional_scores`, which returns the
Gaussian conditional mean and covariance of a trajectory's leading
principal component scores given its sparse noisy observations.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (
    EigenFailure,
    NoPositiveEigenvalue,
    SigmaClampWarning,
    SingularCovariance,
    ValidationError,
)
from .smoothing import (
    Grid,
    Samples1D,
    Samples2D,
    cv_bandwidth_1d,
    cv_bandwidth_2d,
    local_linear_1d,
    local_linear_2d,
)

MODEL_FORMAT = "sparsedist.fitted_model"
MODEL_VERSION = 1

RIDGE_FACTOR = 1e-8
EIG_RTOL = 1e-12


@dataclass(frozen=True)
class SparseTrajectory:
    """Observation times and noisy values of one realization.

    Times are sorted on construction; values follow their times.
    """

    id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        y = np.asarray(self.values, dtype=float).ravel()
        if t.shape != y.shape:
            raise ValidationError(f"trajectory {self.id}: {t.size} times but {y.size} values")
        if t.size < 1:
            raise ValidationError(f"trajectory {self.id}: needs at least one observation")
        if not (np.isfinite(t).all() and np.isfinite(y).all()):
            raise ValidationError(f"trajectory {self.id}: non-finite time or value")
        order = np.argsort(t, kind="stable")
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "times", t[order])
        object.__setattr__(self, "values", y[order])

    def __len__(self):
        return int(self.times.size)


@dataclass(frozen=True)
class ScoreMoments:
    """Conditional mean (length K) and covariance (K x K) of the scores."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def K(self) -> int:
        return int(self.mean.shape[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.cov))


@dataclass(frozen=True)
class FittedModel:
    """Grid-discretized process model.

    ``cov`` is the nonnegative-definite projection rebuilt from the
    retained eigenpairs; ``cov_smoothed`` is the raw local-plane surface.
    ``eigenfunctions`` has one row per retained eigenpair.
    """

    grid: Grid
    mean: np.ndarray
    cov: np.ndarray
    diagonal_v: np.ndarray
    sigma2: float
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    bandwidths: dict = field(default_factory=dict)
    cov_smoothed: np.ndarray | None = None
    sigma2_clamped: bool = False

    @property
    def n_components(self) -> int:
        return int(self.eigenvalues.shape[0])

    def mean_at(self, t) -> np.ndarray:
        return self.grid.interp(self.mean, t)

    def eigenfunctions_at(self, t, K: int | None = None) -> np.ndarray:
        """Matrix of shape (len(t), K) of eigenfunction values at ``t``."""
        K = self.n_components if K is None else K
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([self.grid.interp(self.eigenfunctions[k], t) for k in range(K)], axis=1) \
            if K > 0 else np.zeros((t.size, 0))

    def variance_fractions(self) -> np.ndarray:
        lam = self.eigenvalues
        return lam / lam.sum() if lam.size and lam.sum() > 0 else np.zeros_like(lam)

    # -- serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        m = self.grid.m
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "grid": {"lower": self.grid.lower, "upper": self.grid.upper, "m": m},
            "mean": self.mean.tolist(),
            "cov": {"shape": [m, m], "row_major": self.cov.ravel().tolist()},
            "cov_smoothed": None if self.cov_smoothed is None
            else {"shape": [m, m], "row_major": self.cov_smoothed.ravel().tolist()},
            "diagonal_v": self.diagonal_v.tolist(),
            "sigma2": self.sigma2,
            "sigma2_clamped": self.sigma2_clamped,
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenfunctions": self.eigenfunctions.tolist(),
            "bandwidths": dict(self.bandwidths),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValidationError(f"not a fitted model file (format={d.get('format')!r})")
        if d.get("version") != MODEL_VERSION:
            raise ValidationError(f"unsupported model version {d.get('version')!r}")
        g = d["grid"]
        grid = Grid(float(g["lower"]), float(g["upper"]), int(g["m"]))

        def mat(entry):
            if entry is None:
                return None
            return np.asarray(entry["row_major"], dtype=float).reshape(entry["shape"])

        efun = np.asarray(d["eigenfunctions"], dtype=float).reshape(-1, grid.m)
        return cls(
            grid=grid,
            mean=np.asarray(d["mean"], dtype=float),
            cov=mat(d["cov"]),
            diagonal_v=np.asarray(d["diagonal_v"], dtype=float),
            sigma2=float(d["sigma2"]),
            eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
            eigenfunctions=efun,
            bandwidths=dict(d.get("bandwidths", {})),
            cov_smoothed=mat(d.get("cov_smoothed")),
            sigma2_clamped=bool(d.get("sigma2_clamped", False)),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "FittedModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- estimation steps ---------------------------------------------------------


def pooled_samples(trajectories: Sequence[SparseTrajectory]) -> Samples1D:
    t = np.concatenate([tr.times for tr in trajectories])
    y = np.concatenate([tr.values for tr in trajectories])
    offsets = np.concatenate([[0], np.cumsum([len(tr) for tr in trajectories])]).astype(np.int64)
    return Samples1D(t, y, offsets)


def estimate_mean(trajectories, h_mu: float, grid: Grid) -> np.ndarray:
    if not trajectories:
        raise ValidationError("no trajectories to estimate the mean from")
    return local_linear_1d(pooled_samples(trajectories), h_mu, grid)


def raw_covariances(trajectories, mean: np.ndarray, grid: Grid) -> Samples2D:
    """Off-diagonal products of residuals, both orderings of each pair."""
    s, t, g, counts = [], [], [], []
    for tr in trajectories:
        n = len(tr)
        if n < 2:
            counts.append(0)
            continue
        r = tr.values - grid.interp(mean, tr.times)
        j, l = np.nonzero(~np.eye(n, dtype=bool))
        s.append(tr.times[j])
        t.append(tr.times[l])
        g.append(r[j] * r[l])
        counts.append(j.size)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    if not s:
        empty = np.zeros(0)
        return Samples2D(empty, empty, empty, offsets)
    return Samples2D(np.concatenate(s), np.concatenate(t), np.concatenate(g), offsets)


def estimate_cov_surface(raw: Samples2D, h_G: float, grid: Grid) -> np.ndarray:
    if len(raw) == 0:
        raise ValidationError("no off-diagonal raw covariances (every trajectory has one observation)")
    return local_linear_2d(raw, h_G, grid)


def diagonal_samples(trajectories, mean: np.ndarray, grid: Grid) -> Samples1D:
    pooled = pooled_samples(trajectories)
    r = pooled.y - grid.interp(mean, pooled.t)
    return Samples1D(pooled.t, r * r, pooled.offsets)


def estimate_diagonal_v(trajectories, mean: np.ndarray, h_V: float, grid: Grid) -> np.ndarray:
    return local_linear_1d(diagonal_samples(trajectories, mean, grid), h_V, grid)


def estimate_sigma2(v_hat: np.ndarray, cov_diag: np.ndarray, grid: Grid) -> tuple[float, bool]:
    """Noise variance from the middle half of the domain.

    Returns ``(sigma2, clamped)``; a negative estimate is set to 0, flagged
    and reported with a :class:`SigmaClampWarning`.
    """
    v_hat = np.asarray(v_hat, dtype=float)
    cov_diag = np.asarray(cov_diag, dtype=float)
    if v_hat.shape != (grid.m,) or cov_diag.shape != (grid.m,):
        raise ValidationError("V and the covariance diagonal must live on the grid")
    T = grid.width
    a, b = grid.lower + T / 4, grid.upper - T / 4
    x = grid.points
    knots = np.unique(np.concatenate([[a, b], x[(x > a) & (x < b)]]))
    diff = np.interp(knots, x, v_hat - cov_diag)
    raw = (2.0 / T) * float(np.trapezoid(diff, knots))
    if raw < 0:
        warnings.warn(f"error variance estimate {raw:.4g} < 0; clamped to 0", SigmaClampWarning, stacklevel=2)
        return 0.0, True
    return raw, False


def eigendecompose(cov: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the covariance operator discretized on ``grid``.

    Uses trapezoid quadrature weights ``w`` and the symmetric form
    ``W^1/2 C W^1/2``, so the returned eigenfunctions are exactly
    orthonormal under the same quadrature. Negative (and numerically zero)
    eigenvalues are dropped.

    Returns
    -------
    eigenvalues : ndarray, shape (r,)
        Nonincreasing, strictly positive.
    eigenfunctions : ndarray, shape (r, m)
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (grid.m, grid.m):
        raise ValidationError(f"covariance must be {grid.m}x{grid.m}")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ValidationError("covariance surface is not symmetric")
    sw = np.sqrt(grid.trapezoid_weights())
    B = sw[:, None] * (0.5 * (cov + cov.T)) * sw[None, :]
    try:
        vals, vecs = linalg.eigh(B)
    except linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    top = vals[0] if vals.size else 0.0
    keep = vals > max(top, 0.0) * EIG_RTOL
    if top <= 0:
        keep[:] = False
    vals, vecs = vals[keep], vecs[:, keep]
    phi = (vecs / sw[:, None]).T
    w = grid.trapezoid_weights()
    for k in range(phi.shape[0]):
        integral = phi[k] @ w
        if abs(integral) >= 1e-8:
            sign = np.sign(integral)
        else:
            sign = np.sign(phi[k][np.argmax(np.abs(phi[k]))])
        phi[k] *= sign
    return vals, phi


def select_k(eigenvalues, fraction: float = 0.95) -> int:
    """Smallest K whose leading eigenvalues reach ``fraction`` of the total."""
    if not 0 < fraction <= 1:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    lam = np.asarray(eigenvalues, dtype=float)
    lam = lam[lam > 0]
    if lam.size == 0:
        raise NoPositiveEigenvalue("no positive eigenvalue to select components from")
    ratio = np.cumsum(lam) / lam.sum()
    return int(np.argmax(ratio >= fraction - 1e-12) + 1)


def project_psd(eigenvalues, eigenfunctions) -> np.ndarray:
    phi = np.asarray(eigenfunctions)
    c = (phi.T * np.asarray(eigenvalues)) @ phi
    return 0.5 * (c + c.T)


def conditional_scores(traj: SparseTrajectory, model: FittedModel, K: int) -> ScoreMoments:
    """Conditional mean and covariance of the first ``K`` scores of ``traj``.

    ``Sigma_Y = C(T, T) + sigma2 I`` uses the full nonnegative-definite
    covariance; a tiny ridge is added only if that matrix is numerically
    singular.
    """
    if not 1 <= K <= model.n_components:
        raise ValidationError(f"K={K} outside 1..{model.n_components}")
    phi_all = model.eigenfunctions_at(traj.times)
    lam_all = model.eigenvalues
    sigma = (phi_all * lam_all) @ phi_all.T
    sigma = 0.5 * (sigma + sigma.T)
    sigma[np.diag_indices_from(sigma)] += model.sigma2
    resid = traj.values - model.mean_at(traj.times)
    factor = _cholesky(sigma, traj.id)
    lam = lam_all[:K]
    cross = phi_all[:, :K] * lam  # cov(Y, xi) = Phi Lambda
    solved = linalg.cho_solve(factor, np.column_stack([resid, cross]))
    mean = cross.T @ solved[:, 0]
    cov = np.diag(lam) - cross.T @ solved[:, 1:]
    cov = 0.5 * (cov + cov.T)
    return ScoreMoments(mean, cov)


def _cholesky(sigma, tid):
    n = sigma.shape[0]
    try:
        c = linalg.cholesky(sigma, lower=True)
        d = np.diag(c)
        if (d.min() / d.max()) ** 2 >= 1e-12:
            return c, True
    except linalg.LinAlgError:
        pass
    ridged = sigma + RIDGE_FACTOR * np.max(np.diag(sigma)) * np.eye(n)
    try:
        return linalg.cholesky(ridged, lower=True), True
    except linalg.LinAlgError as exc:
        raise SingularCovariance(f"trajectory {tid}: observation covariance is singular") from exc


# -- full fit -----------------------------------------------------------------


def fit_model(
    trajectories: Sequence[SparseTrajectory],
    grid: Grid | None = None,
    h_mu: float | str = "cv",
    h_cov: float | str = "cv",
    h_v: float | str = "cv",
    candidates: Sequence[float] | None = None,
) -> FittedModel:
    """Run the whole estimation chain on a set of trajectories.

    Each bandwidth is either a positive number or ``"cv"`` for
    leave-one-curve-out selection over ``candidates``.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValidationError("no trajectories to fit")
    if grid is None:
        grid = Grid.covering(np.concatenate([tr.times for tr in trajectories]))

    if h_mu == "cv":
        h_mu = cv_bandwidth_1d(trajectories, candidates, "mean", grid)
    mean = estimate_mean(trajectories, float(h_mu), grid)

    raw = raw_covariances(trajectories, mean, grid)
    if h_cov == "cv":
        h_cov = cv_bandwidth_2d(trajectories, candidates, grid, samples=raw)
    cov_s = estimate_cov_surface(raw, float(h_cov), grid)

    if h_v == "cv":
        h_v = cv_bandwidth_1d(trajectories, candidates, "diagonal", grid, mean=mean)
    v_hat = estimate_diagonal_v(trajectories, mean, float(h_v), grid)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SigmaClampWarning)
        sigma2, clamped = estimate_sigma2(v_hat, np.diag(cov_s), grid)
    for w in caught:
        warnings.warn(w.message, w.category, stacklevel=2)

    lam, phi = eigendecompose(cov_s, grid)
    if lam.size == 0:
        raise NoPositiveEigenvalue("smoothed covariance has no positive eigenvalue")
    return FittedModel(
        grid=grid,
        mean=mean,
        cov=project_psd(lam, phi),
        diagonal_v=v_hat,
        sigma2=sigma2,
        eigenvalues=lam,
        eigenfunctions=phi,
        bandwidths={"mu": float(h_mu), "cov": float(h_cov), "v": float(h_v)},
        cov_smoothed=cov_s,
        sigma2_clamped=clamped,
    )
