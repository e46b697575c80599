"""Plug-in conditional L2 distance between sparsely observed trajectories."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatch, NumericalError, ValidationError
from .fpca import FittedModel, ScoreMoments, SparseTrajectory, conditional_scores


@dataclass(frozen=True)
class DistanceMatrix:
    ids: list
    entries: np.ndarray
    K: int

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def to_csv(self, path) -> None:
        """Square CSV: one header row of ids, then ``n`` rows of ``n`` values."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.ids)
            for row in self.entries:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, K: int = 0) -> "DistanceMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValidationError(f"{path}: empty distance file")
        ids = rows[0]
        try:
            entries = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise ValidationError(f"{path}: non-numeric distance entry ({exc})") from exc
        n = len(ids)
        if entries.shape != (n, n):
            raise ValidationError(f"{path}: expected {n}x{n} entries, got {entries.shape}")
        check_distance_entries(entries)
        return cls(ids, entries, K)


def check_distance_entries(entries: np.ndarray, atol: float = 1e-12) -> None:
    if not np.isfinite(entries).all():
        raise ValidationError("distance matrix has non-finite entries")
    if np.abs(entries - entries.T).max(initial=0.0) > atol:
        raise ValidationError("distance matrix is not symmetric")
    if np.any(np.diag(entries) != 0):
        raise ValidationError("distance matrix has a nonzero diagonal")
    if np.any(entries < 0):
        raise ValidationError("distance matrix has negative entries")


def pair_distance(score_i: ScoreMoments, score_j: ScoreMoments) -> float:
    """sqrt(tr cov_i + tr cov_j + |mean_i - mean_j|^2)."""
    if score_i.K != score_j.K:
        raise DimensionMismatch(f"score dimensions differ: {score_i.K} vs {score_j.K}")
    diff = score_i.mean - score_j.mean
    return float(np.sqrt(score_i.trace + score_j.trace + diff @ diff))


def score_table(trajectories: Sequence[SparseTrajectory], model: FittedModel, K: int) -> list[ScoreMoments]:
    scores = []
    for tr in trajectories:
        try:
            scores.append(conditional_scores(tr, model, K))
        except (NumericalError, ValidationError) as exc:
            raise type(exc)(f"trajectory {tr.id}: {exc}") from exc
    return scores


def distance_from_scores(scores: Sequence[ScoreMoments]) -> np.ndarray:
    if not scores:
        return np.zeros((0, 0))
    Ks = {s.K for s in scores}
    if len(Ks) != 1:
        raise DimensionMismatch(f"mixed score dimensions {sorted(Ks)}")
    means = np.stack([s.mean for s in scores])
    traces = np.array([s.trace for s in scores])
    return kernels.distance_matrix(np.ascontiguousarray(means), traces)


def distance_matrix(trajectories: Sequence[SparseTrajectory], model: FittedModel, K: int) -> DistanceMatrix:
    """All pairwise plug-in distances; one score computation per trajectory."""
    scores = score_table(trajectories, model, K)
    return DistanceMatrix([tr.id for tr in trajectories], distance_from_scores(scores), K)


def max_triangle_violation(entries: np.ndarray) -> float:
    """Largest ``d[i, j] - d[i, k] - d[k, j]`` over all triples (<= 0 for a metric)."""
    return float(kernels.max_triangle_violation(np.ascontiguousarray(entries, dtype=float)))
