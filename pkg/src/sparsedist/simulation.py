"""Synthetic Karhunen-Loeve processes with a known spectrum.

A :class:`ProcessSpec` stores its mean and eigenfunctions on a fine grid;
curves are generated through linear interpolation of those arrays, so the
true model seen by the oracle is exactly the model that produced the data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distance import pair_distance
from .errors import ValidationError
from .fpca import FittedModel, ScoreMoments, SparseTrajectory, conditional_scores
from .smoothing import Grid

RNG_NAME = "numpy.PCG64"
RNG_VERSION = 1


@dataclass(frozen=True)
class ProcessSpec:
    """Mean + sum of ``sqrt(lambda_k) z_k phi_k`` on a fine grid, plus N(0, sigma2) noise.

    ``density`` holds nonnegative sampling weights for observation times on
    the grid (uniform if omitted); ``counts``/``count_probs`` give the law
    of the number of observations per curve.
    """

    grid: Grid
    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    sigma2: float
    density: np.ndarray | None = None
    counts: tuple = (2, 3, 4, 5, 6)
    count_probs: tuple | None = None
    _model: FittedModel | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).ravel()
        phi = np.asarray(self.eigenfunctions, dtype=float).reshape(lam.size, self.grid.m)
        mu = np.asarray(self.mean, dtype=float).ravel()
        if mu.size != self.grid.m or phi.shape[1] != self.grid.m:
            raise ValidationError("mean and eigenfunctions must be given on the spec grid")
        if np.any(lam <= 0) or np.any(np.diff(lam) > 0):
            raise ValidationError("eigenvalues must be positive and nonincreasing")
        if self.sigma2 < 0:
            raise ValidationError("sigma2 must be nonnegative")
        gram = phi @ (phi * self.grid.trapezoid_weights()).T
        if lam.size and np.abs(gram - np.eye(lam.size)).max() > 1e-8:
            raise ValidationError("eigenfunctions are not orthonormal on the spec grid")
        dens = np.ones(self.grid.m) if self.density is None else np.asarray(self.density, dtype=float)
        if dens.shape != (self.grid.m,) or np.any(dens < 0) or dens.sum() <= 0:
            raise ValidationError("density must be nonnegative weights on the grid")
        probs = np.full(len(self.counts), 1 / len(self.counts)) if self.count_probs is None \
            else np.asarray(self.count_probs, dtype=float)
        if probs.shape != (len(self.counts),) or np.any(probs < 0) or min(self.counts) < 1:
            raise ValidationError("counts must be >= 1 with matching nonnegative probabilities")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenfunctions", phi)
        object.__setattr__(self, "density", dens / self.grid.integrate(dens))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "count_probs", tuple(probs / probs.sum()))

    @property
    def K_true(self) -> int:
        return int(self.eigenvalues.size)

    def as_model(self) -> FittedModel:
        """The true model in :class:`FittedModel` form (cached)."""
        if self._model is None:
            phi, lam = self.eigenfunctions, self.eigenvalues
            cov = (phi.T * lam) @ phi
            model = FittedModel(
                grid=self.grid,
                mean=self.mean,
                cov=cov,
                diagonal_v=np.diag(cov) + self.sigma2,
                sigma2=float(self.sigma2),
                eigenvalues=lam,
                eigenfunctions=phi,
                bandwidths={},
                cov_smoothed=cov,
            )
            object.__setattr__(self, "_model", model)
        return self._model

    def truncated(self, K: int) -> "ProcessSpec":
        return ProcessSpec(self.grid, self.mean, self.eigenvalues[:K], self.eigenfunctions[:K],
                           self.sigma2, self.density, self.counts, self.count_probs)

    def _time_cdf(self):
        x = self.grid.points
        d = self.density
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(x))])
        return x, cdf / cdf[-1]


def default_spec(m: int = 1001, sigma2: float = 0.1, eigenvalues=(4.0, 1.0, 0.25)) -> ProcessSpec:
    """Domain [0, 1], mean sin(2 pi t), eigenfunctions sqrt(2) sin/cos harmonics."""
    grid = Grid(0.0, 1.0, m)
    t = grid.points
    basis = [
        np.sqrt(2) * np.sin(2 * np.pi * t),
        np.sqrt(2) * np.cos(2 * np.pi * t),
        np.sqrt(2) * np.sin(4 * np.pi * t),
        np.sqrt(2) * np.cos(4 * np.pi * t),
        np.sqrt(2) * np.sin(6 * np.pi * t),
    ]
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size > len(basis):
        raise ValidationError(f"default spec supports at most {len(basis)} components")
    return ProcessSpec(grid, np.sin(2 * np.pi * t), lam, np.stack(basis[: lam.size]), sigma2)


@dataclass(frozen=True)
class SimulatedCurve:
    trajectory: SparseTrajectory
    true_scores: np.ndarray
    group: int = 0


def _streams(seed, n):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def _draw_curve(rng, spec: ProcessSpec, idx: int, score_mean=None, score_var=None, prefix="sim"):
    lam = spec.eigenvalues if score_var is None else np.asarray(score_var, dtype=float)
    loc = np.zeros(spec.K_true) if score_mean is None else np.asarray(score_mean, dtype=float)
    xi = loc + np.sqrt(lam) * rng.standard_normal(spec.K_true)
    n_obs = int(rng.choice(spec.counts, p=spec.count_probs))
    x, cdf = spec._time_cdf()
    times = np.interp(rng.random(n_obs), cdf, x)
    signal = spec.grid.interp(spec.mean, times)
    for k in range(spec.K_true):
        signal = signal + xi[k] * spec.grid.interp(spec.eigenfunctions[k], times)
    noise = np.sqrt(spec.sigma2) * rng.standard_normal(n_obs) if spec.sigma2 > 0 else np.zeros(n_obs)
    return SparseTrajectory(f"{prefix}{idx:05d}", times, signal + noise), xi


def sample_curves(spec: ProcessSpec, n: int, seed: int = 0, prefix: str = "sim") -> list[SimulatedCurve]:
    """``n`` independent curves; curve ``i`` draws from its own spawned stream."""
    if n < 1:
        raise ValidationError(f"need n >= 1 curves, got {n}")
    out = []
    for i, rng in enumerate(_streams(seed, n)):
        traj, xi = _draw_curve(rng, spec, i, prefix=prefix)
        out.append(SimulatedCurve(traj, xi))
    return out


def sample_planted_groups(
    spec: ProcessSpec,
    group_means: np.ndarray,
    n_per_group: int,
    seed: int = 0,
    within_var: Sequence[float] | None = None,
) -> list[SimulatedCurve]:
    """Curves whose scores are drawn around group-specific centres.

    ``group_means`` has one row of length ``spec.K_true`` per group; the
    within-group score variances default to the spec eigenvalues.
    """
    group_means = np.atleast_2d(np.asarray(group_means, dtype=float))
    if group_means.shape[1] != spec.K_true:
        raise ValidationError("group means need one entry per spec component")
    n_groups = group_means.shape[0]
    out = []
    streams = _streams(seed, n_groups * n_per_group)
    for idx, rng in enumerate(streams):
        g = idx % n_groups
        traj, xi = _draw_curve(rng, spec, idx, group_means[g], within_var)
        out.append(SimulatedCurve(traj, xi, g))
    return out


def oracle_scores(curve: SimulatedCurve | SparseTrajectory, spec: ProcessSpec, K: int) -> ScoreMoments:
    """Conditional score moments under the true model."""
    if K > spec.K_true:
        raise ValidationError(f"K={K} exceeds the {spec.K_true} true components")
    traj = curve.trajectory if isinstance(curve, SimulatedCurve) else curve
    return conditional_scores(traj, spec.as_model(), K)


def oracle_pair_distance(curve_i, curve_j, spec: ProcessSpec, K: int) -> float:
    return pair_distance(oracle_scores(curve_i, spec, K), oracle_scores(curve_j, spec, K))


def true_l2_distance(curve_i: SimulatedCurve, curve_j: SimulatedCurve, K: int | None = None) -> float:
    """L2 distance between the latent curves via their true scores."""
    d = curve_i.true_scores[:K] - curve_j.true_scores[:K]
    return float(np.sqrt(d @ d))


def latent_curve(curve: SimulatedCurve, spec: ProcessSpec) -> np.ndarray:
    """The noiseless latent curve on the spec grid."""
    return spec.mean + curve.true_scores @ spec.eigenfunctions


def write_bids_csv(curves: Sequence[SimulatedCurve], path, auction_id: str = "SIM") -> int:
    """Write curves in the bids CSV layout; returns the number of rows."""
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["auction_id", "bidder_id", "bid_time_hours", "bid_amount"])
        for c in curves:
            tr = c.trajectory
            for t, y in zip(tr.times, tr.values):
                w.writerow([auction_id, tr.id, repr(float(t)), repr(float(y))])
                rows += 1
    return rows


def spec_from_config(cfg: dict) -> ProcessSpec:
    """Build the default-family spec from a config mapping."""
    cfg = dict(cfg or {})
    spec = default_spec(
        m=int(cfg.get("fine_grid", 1001)),
        sigma2=float(cfg.get("sigma2", 0.1)),
        eigenvalues=tuple(cfg.get("eigenvalues", (4.0, 1.0, 0.25))),
    )
    counts = cfg.get("counts")
    if counts is not None:
        spec = ProcessSpec(spec.grid, spec.mean, spec.eigenvalues, spec.eigenfunctions, spec.sigma2,
                           None, tuple(counts), cfg.get("count_probs"))
    return spec
