"""K-means (Lloyd iterations, k-means++ seeding) on embedded points."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidK, ValidationError


@dataclass
class ClusterResult:
    labels: np.ndarray  # values in 1..k
    centers: np.ndarray
    within_ss: float
    restarts_used: int
    iterations: int = 0

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])

    def to_csv(self, path, ids) -> None:
        write_labels_csv(path, ids, self.labels)


def write_labels_csv(path, ids, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "label"])
        for i, lab in zip(ids, labels):
            w.writerow([i, int(lab)])


def read_labels_csv(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["id", "label"]:
        raise ValidationError(f"{path}: expected header id,label")
    try:
        return [r[0] for r in rows[1:]], np.array([int(r[1]) for r in rows[1:]], dtype=int)
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _sq_dist(x, c):
    return np.sum((x[:, None, :] - c[None, :, :]) ** 2, axis=2)


def _kmeanspp(x, k, rng):
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((x - x[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return x[idx].copy()


def _repair_empty(x, labels, centers):
    k = centers.shape[0]
    for c in range(k):
        if np.any(labels == c):
            continue
        own = np.sum((x - centers[labels]) ** 2, axis=1)
        sizes = np.bincount(labels, minlength=k)
        own[sizes[labels] <= 1] = -1.0  # never empty another cluster
        far = int(np.argmax(own))
        labels[far] = c
        centers[c] = x[far]
    return labels


def _lloyd(x, k, rng, max_iters, history=None):
    centers = _kmeanspp(x, k, rng)
    labels = np.argmin(_sq_dist(x, centers), axis=1)
    it = 0
    for it in range(1, max_iters + 1):
        labels = _repair_empty(x, labels, centers)
        centers = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
        if history is not None:
            history.append(float(np.sum((x - centers[labels]) ** 2)))
        new = np.argmin(_sq_dist(x, centers), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    labels = _repair_empty(x, labels, centers)
    centers = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
    wss = float(np.sum((x - centers[labels]) ** 2))
    return labels, centers, wss, it


def kmeans(points, k: int, restarts: int = 20, max_iters: int = 300, seed: int = 0,
           threads: int = 1) -> ClusterResult:
    """Best-of-``restarts`` K-means by total within-cluster sum of squares."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if int(k) != k or not 1 <= k <= n:
        raise InvalidK(f"k={k} must be an integer in 1..{n}")
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    streams = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(restarts)]

    def run(rng):
        return _lloyd(x, int(k), rng, max_iters)

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, streams))
    else:
        results = [run(r) for r in streams]
    best = int(np.argmin([r[2] for r in results]))
    labels, centers, wss, it = results[best]
    return ClusterResult(labels + 1, centers, wss, restarts, it)


def relabel_canonical(result: ClusterResult, points=None) -> ClusterResult:
    """Renumber clusters by ascending first centre coordinate (ties: second)."""
    c = result.centers
    keys = [c[:, q] for q in range(min(c.shape[1], 2))][::-1]
    order = np.lexsort(keys)  # old cluster indices in new order
    new_of_old = np.empty(c.shape[0], dtype=int)
    new_of_old[order] = np.arange(1, c.shape[0] + 1)
    return ClusterResult(new_of_old[result.labels - 1], c[order], result.within_ss,
                         result.restarts_used, result.iterations)


def within_ss_report(points, ks, restarts: int = 20, seed: int = 0) -> list[tuple[int, float]]:
    """Within-cluster sum of squares for each ``k`` in ``ks`` (an aid for choosing k)."""
    x = np.asarray(points, dtype=float)
    return [(int(k), kmeans(x, k, restarts=restarts, seed=seed).within_ss) for k in ks if 1 <= k <= len(x)]
