"""Metric multidimensional scaling of a dissimilarity matrix.

Classical scaling provides the start; normalized stress, s-stress or the
Sammon loss is then reduced by gradient descent with Armijo backtracking.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg

from . import kernels
from .errors import AllZeroDissimilarities, EigenFailure, ValidationError

Criterion = Literal["stress", "sstress", "sammon"]
_CODES = {"stress": 0, "sstress": 1, "sammon": 2}


@dataclass
class Embedding:
    points: np.ndarray
    criterion: str
    value: float
    iterations: int
    converged: bool
    ids: list = field(default_factory=list)
    restart_values: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        ids = self.ids or [str(i) for i in range(self.points.shape[0])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id"] + [f"x{q + 1}" for q in range(self.points.shape[1])])
            for i, row in zip(ids, self.points):
                w.writerow([i] + [repr(float(v)) for v in row])


def read_embedding_csv(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][0] != "id":
        raise ValidationError(f"{path}: not an embedding file")
    ids = [r[0] for r in rows[1:]]
    try:
        pts = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return ids, pts


def _as_array(D) -> np.ndarray:
    d = getattr(D, "entries", D)
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError("dissimilarities must form a square matrix")
    return d


def classical_mds(D, p: int = 2) -> np.ndarray:
    """Classical (Torgerson) scaling into ``p`` dimensions."""
    d = _as_array(D)
    n = d.shape[0]
    if not 1 <= p <= max(n - 1, 1):
        raise ValidationError(f"dimension p={p} must lie in 1..{max(n - 1, 1)}")
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (d * d) @ J
    try:
        vals, vecs = linalg.eigh(0.5 * (B + B.T))
    except linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    order = np.argsort(vals)[::-1][:p]
    return vecs[:, order] * np.sqrt(np.maximum(vals[order], 0.0))


def _normalizer(d, criterion):
    iu = np.triu_indices(d.shape[0], 1)
    dl = d[iu]
    if not np.any(dl > 0):
        raise AllZeroDissimilarities("every dissimilarity is zero")
    if criterion == "stress":
        return float(np.sum(dl ** 2))
    if criterion == "sstress":
        return float(np.sum(dl ** 4))
    if criterion == "sammon":
        return float(np.sum(dl))
    raise ValidationError(f"unknown MDS criterion {criterion!r}")


def _check(points, d):
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != d.shape[0]:
        raise ValidationError(f"configuration has {x.shape[0]} rows, dissimilarities {d.shape[0]}")
    return x


def criterion_value(points, D, criterion: Criterion = "sstress") -> float:
    """Normalized loss of ``points`` against dissimilarities ``D``.

    stress: sum (d - delta)^2 / sum delta^2; s-stress: sum (d^2 - delta^2)^2 /
    sum delta^4; Sammon: sum (d - delta)^2 / delta / sum delta, with pairs of
    zero dissimilarity left out of the Sammon sums.
    """
    d = _as_array(D)
    x = _check(points, d)
    den = _normalizer(d, criterion)
    loss, _ = kernels.mds_loss_grad(x, d, _CODES[criterion])
    return loss / den


def criterion_gradient(points, D, criterion: Criterion = "sstress") -> np.ndarray:
    d = _as_array(D)
    x = _check(points, d)
    den = _normalizer(d, criterion)
    _, grad = kernels.mds_loss_grad(x, d, _CODES[criterion])
    return grad / den


def _descend(x, d, code, den, max_iters, tol):
    f, g = kernels.mds_loss_grad(x, d, code)
    f /= den
    g = g / den
    step = 1.0 / max(np.sqrt(np.sum(g * g)), 1e-12)
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        gg = float(np.sum(g * g))
        if f <= 1e-300 or gg == 0.0:
            converged = True
            break
        accepted = False
        for _ in range(60):
            xn = x - step * g
            fn, gn = kernels.mds_loss_grad(xn, d, code)
            fn /= den
            if fn <= f - 1e-4 * step * gg:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        rel = (f - fn) / max(f, 1e-300)
        x, f, g = xn, fn, gn / den
        step *= 2.0
        if rel < tol:
            converged = True
            break
    return x, f, it, converged


def metric_mds(
    D,
    p: int = 2,
    criterion: Criterion = "sstress",
    max_iters: int = 2000,
    tol: float = 1e-9,
    restarts: int = 4,
    seed: int = 0,
    threads: int = 1,
) -> Embedding:
    """Best-of-restarts metric MDS.

    Restart 0 starts from classical scaling; the others from seeded random
    perturbations of it (scale 1e-2 of its RMS coordinate). Non-convergence
    within ``max_iters`` is reported through ``Embedding.converged``.
    """
    d = _as_array(D)
    n = d.shape[0]
    if n < 2:
        raise ValidationError("metric MDS needs at least two objects")
    if p < 1:
        raise ValidationError("dimension p must be >= 1")
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    code = _CODES.get(criterion)
    if code is None:
        raise ValidationError(f"unknown MDS criterion {criterion!r}")
    den = _normalizer(d, criterion)
    x0 = classical_mds(d, min(p, n - 1))
    if x0.shape[1] < p:
        x0 = np.hstack([x0, np.zeros((n, p - x0.shape[1]))])
    rms = float(np.sqrt(np.mean(x0 ** 2))) or 1.0
    starts = [x0]
    for ss in np.random.SeedSequence(seed).spawn(restarts - 1):
        rng = np.random.Generator(np.random.PCG64(ss))
        starts.append(x0 + 1e-2 * rms * rng.standard_normal(x0.shape))

    def run(x):
        return _descend(np.array(x, dtype=float), d, code, den, max_iters, tol)

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(x) for x in starts]
    values = [r[1] for r in results]
    best = int(np.argmin(values))  # argmin keeps the lowest index on ties
    x, _, it, conv = results[best]
    ids = list(getattr(D, "ids", []) or [])
    return Embedding(x, criterion, criterion_value(x, d, criterion), it, conv, ids, values)


def procrustes_rms(x, y) -> float:
    """RMS distance between ``x`` and the best rigid motion of ``y`` onto it."""
    x = np.asarray(x, dtype=float) - np.mean(x, axis=0)
    y = np.asarray(y, dtype=float) - np.mean(y, axis=0)
    u, _, vt = np.linalg.svd(y.T @ x)
    return float(np.sqrt(np.mean(np.sum((y @ u @ vt - x) ** 2, axis=1))))
