"""The numba kernels and their numpy twins agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from sparsedist import kernels

nk = kernels.numpy_kernels
jk = kernels.numba_kernels
pytestmark = pytest.mark.skipif(jk is None, reason="numba not installed")


@pytest.fixture
def data(rng):
    n_curves = 30
    counts = rng.integers(2, 7, n_curves)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    x = rng.uniform(0, 1, offsets[-1])
    y = np.sin(5 * x) + rng.standard_normal(x.size) * 0.3
    grid = np.linspace(0, 1, 21)
    s, t, g, off2 = [], [], [], [0]
    for c in range(n_curves):
        xi = x[offsets[c]:offsets[c + 1]]
        yi = y[offsets[c]:offsets[c + 1]]
        j, l = np.where(~np.eye(xi.size, dtype=bool))
        s.append(xi[j]); t.append(xi[l]); g.append(yi[j] * yi[l])
        off2.append(off2[-1] + j.size)
    return dict(x=x, y=y, offsets=offsets, grid=grid, s=np.concatenate(s), t=np.concatenate(t),
                g=np.concatenate(g), off2=np.asarray(off2, dtype=np.int64))


def test_moments_parity(data):
    d = data
    np.testing.assert_allclose(jk.moments_1d(d["x"], d["y"], d["grid"], 0.2),
                               nk.moments_1d(d["x"], d["y"], d["grid"], 0.2), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(jk.curve_moments_1d(d["x"], d["y"], d["offsets"], d["grid"], 0.2),
                               nk.curve_moments_1d(d["x"], d["y"], d["offsets"], d["grid"], 0.2),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(jk.moments_2d(d["s"], d["t"], d["g"], d["grid"], 0.3),
                               nk.moments_2d(d["s"], d["t"], d["g"], d["grid"], 0.3), rtol=1e-11, atol=1e-11)


def test_solve_parity(data):
    d = data
    m1 = nk.moments_1d(d["x"], d["y"], d["grid"], 0.05)
    for a, b in zip(jk.solve_1d(m1), nk.solve_1d(m1)):
        np.testing.assert_array_equal(np.isnan(a), np.isnan(b))
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    m2 = nk.moments_2d(d["s"], d["t"], d["g"], d["grid"], 0.15)
    b0j, badj = jk.solve_2d(m2)
    b0n, badn = nk.solve_2d(m2)
    np.testing.assert_array_equal(badj, badn)
    np.testing.assert_allclose(b0j[~badn], b0n[~badn], rtol=1e-9, atol=1e-10)


def test_cv_parity(data):
    d = data
    for h in (0.05, 0.2, 0.6):
        a = jk.loo_cv_1d(d["x"], d["y"], d["offsets"], d["grid"], h)
        b = nk.loo_cv_1d(d["x"], d["y"], d["offsets"], d["grid"], h)
        assert a[1] == b[1]
        if not a[1]:
            assert a[0] == pytest.approx(b[0], rel=1e-9)
    for h in (0.2, 0.5):
        a = jk.loo_cv_2d(d["s"], d["t"], d["g"], d["off2"], d["grid"], h)
        b = nk.loo_cv_2d(d["s"], d["t"], d["g"], d["off2"], d["grid"], h)
        assert a[1] == b[1]
        assert a[0] == pytest.approx(b[0], rel=1e-8)


def test_interp_parity(rng):
    grid = np.linspace(0, 2, 11)
    surf = rng.standard_normal((11, 11))
    s, t = rng.uniform(-0.5, 2.5, 50), rng.uniform(0, 2, 50)
    np.testing.assert_allclose(jk.interp_grid_2d(grid, surf, s, t), nk.interp_grid_2d(grid, surf, s, t),
                               rtol=1e-13, atol=1e-13)


def test_distance_and_triangle_parity(rng):
    means = rng.standard_normal((40, 3))
    traces = rng.uniform(0, 1, 40)
    a = jk.distance_matrix(means, traces)
    b = nk.distance_matrix(means, traces)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14)
    assert jk.max_triangle_violation(a) == pytest.approx(nk.max_triangle_violation(b), abs=1e-14)


@pytest.mark.parametrize("code", [0, 1, 2])
def test_mds_parity(rng, code):
    x = rng.standard_normal((12, 2))
    delta = np.abs(rng.standard_normal((12, 12)))
    delta = delta + delta.T
    np.fill_diagonal(delta, 0)
    delta[0, 1] = delta[1, 0] = 0.0
    fa, ga = jk.mds_loss_grad(x, delta, code)
    fb, gb = nk.mds_loss_grad(x, delta, code)
    assert fa == pytest.approx(fb, rel=1e-12)
    np.testing.assert_allclose(ga, gb, rtol=1e-10, atol=1e-12)


def test_env_flag_selects_numpy():
    code = "from sparsedist import kernels; print(kernels.backend_name())"
    env = dict(os.environ, SPARSEDIST_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
