import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import adjusted_rand_score

from sparsedist.clustering import (
    ClusterResult,
    _lloyd,
    kmeans,
    read_labels_csv,
    relabel_canonical,
    within_ss_report,
    write_labels_csv,
)
from sparsedist.errors import InvalidK


def _brute_best_2partition(x):
    best = np.inf
    n = len(x)
    for mask in itertools.product([0, 1], repeat=n):
        m = np.array(mask, dtype=bool)
        if m.all() or not m.any():
            continue
        w = sum(np.sum((x[s] - x[s].mean(axis=0)) ** 2) for s in (m, ~m))
        best = min(best, w)
    return best


def test_four_points_two_clusters():
    x = np.array([[0, 0], [0.1, 0], [10, 0], [10.1, 0]])
    r = kmeans(x, 2)
    assert r.labels[0] == r.labels[1] != r.labels[2] == r.labels[3]
    assert r.within_ss == pytest.approx(0.01, abs=1e-12)
    assert r.within_ss == pytest.approx(_brute_best_2partition(x), abs=1e-12)


def test_k_one_and_k_n(rng):
    x = rng.standard_normal((9, 2))
    r = kmeans(x, 1)
    np.testing.assert_allclose(r.centers[0], x.mean(axis=0))
    assert r.within_ss == pytest.approx(x.var(axis=0).sum() * 9)
    assert set(r.labels) == {1}
    r = kmeans(x, 9)
    assert r.within_ss == pytest.approx(0.0, abs=1e-24)
    assert sorted(r.labels) == list(range(1, 10))


def test_invalid_k():
    for k in (0, 4, 1.5):
        with pytest.raises(InvalidK):
            kmeans(np.zeros((3, 2)), k)


def test_centers_are_means_and_labels_in_range(rng):
    x = rng.standard_normal((50, 2))
    r = kmeans(x, 4)
    assert set(r.labels) <= {1, 2, 3, 4}
    for c in range(4):
        np.testing.assert_allclose(r.centers[c], x[r.labels == c + 1].mean(axis=0), atol=1e-12)


def test_relabel_examples():
    centers = np.array([[5.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    r = ClusterResult(np.array([1, 2, 3, 1]), centers, 0.0, 1)
    out = relabel_canonical(r)
    np.testing.assert_array_equal(out.labels, [3, 1, 2, 3])
    # old cluster 1 (x=5) becomes 3, old 2 (x=1) becomes 1, old 3 (x=3) becomes 2:
    # listing old clusters in new order gives (2, 3, 1)
    np.testing.assert_array_equal(out.centers[:, 0], [1.0, 3.0, 5.0])
    r2 = ClusterResult(np.array([1, 2, 3]), np.array([[0.0, 0], [1, 0], [2, 0]]), 0.0, 1)
    np.testing.assert_array_equal(relabel_canonical(r2).labels, [1, 2, 3])
    tie = ClusterResult(np.array([1, 2, 3]), np.array([[1.0, 5], [1.0, -2], [0.0, 9]]), 0.0, 1)
    hand = sorted([(1.0, 5, 1), (1.0, -2, 2), (0.0, 9, 3)])
    new = relabel_canonical(tie).labels
    assert [old for *_, old in hand] == [int(np.where(new == i)[0][0]) + 1 for i in (1, 2, 3)]


def test_within_ss_monotone_over_iterations(rng):
    x = np.concatenate([rng.standard_normal((40, 2)) + c for c in ([0, 0], [3, 0], [0, 3], [3, 3])])
    for seed in range(10):
        hist = []
        _lloyd(x, 5, np.random.default_rng(seed), 300, history=hist)
        assert np.all(np.diff(hist) <= 1e-9)


def _blobs(seed, n=300, spread=1.0):
    r = np.random.default_rng(seed)
    centres = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 10.0]]) * spread * 1.5
    truth = np.repeat(np.arange(3), n // 3)
    return centres[truth] + r.standard_normal((n, 2)) * spread * 0.15, truth


def test_blob_recovery():
    hits = 0
    for seed in range(20):
        x, truth = _blobs(seed)
        hits += adjusted_rand_score(truth, kmeans(x, 3, seed=seed).labels) == 1.0
    assert hits >= 19


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_permutation_invariance_after_relabel(seed):
    x, _ = _blobs(seed, n=60)
    perm = np.random.default_rng(seed).permutation(60)
    a = relabel_canonical(kmeans(x, 3, seed=1))
    b = relabel_canonical(kmeans(x[perm], 3, seed=1))
    np.testing.assert_array_equal(a.labels[perm], b.labels)


def test_deterministic_with_threads(rng):
    x = rng.standard_normal((80, 2))
    a = kmeans(x, 4, seed=3)
    b = kmeans(x, 4, seed=3, threads=4)
    assert np.array_equal(a.labels, b.labels) and a.within_ss == b.within_ss


def test_empty_cluster_repair():
    # duplicated points force k-means++ to draw coincident centres
    x = np.array([[0.0, 0.0]] * 5 + [[1.0, 0.0]])
    r = kmeans(x, 3, restarts=3)
    assert sorted(set(r.labels)) == [1, 2, 3]


def test_labels_csv_roundtrip(tmp_path):
    p = tmp_path / "l.csv"
    write_labels_csv(p, ["a", "b"], [2, 1])
    ids, labels = read_labels_csv(p)
    assert ids == ["a", "b"] and list(labels) == [2, 1]


def test_within_ss_report(rng):
    x = rng.standard_normal((30, 2))
    rep = within_ss_report(x, [1, 2, 3])
    assert [k for k, _ in rep] == [1, 2, 3]
    assert rep[0][1] >= rep[1][1] >= rep[2][1]
