"""Pure-numpy implementations of the hot kernels.

Every function here has a twin with the same signature in
``_kernels_numba``; ``sparsedist.kernels`` picks one at import time.
"""
import numpy as np

# moment layouts
# 1-D: count, S0, Su, Suu, R0, Ru                         (u = (x - g) / h)
# 2-D: count, S00, Su, Sv, Suu, Suv, Svv, R0, Ru, Rv      (u, v scaled offsets)
N_MOM_1D = 6
N_MOM_2D = 10
DEGEN_RTOL = 1e-10

_CHUNK = 1 << 15


def _epan(u):
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


def moments_1d(x, y, grid, h):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros((grid.shape[0], N_MOM_1D))
    for lo in range(0, x.shape[0], _CHUNK):
        xs, ys = x[lo:lo + _CHUNK], y[lo:lo + _CHUNK]
        u = (xs[None, :] - grid[:, None]) / h
        w = _epan(u)
        wu = w * u
        out[:, 0] += (w > 0).sum(axis=1)
        out[:, 1] += w.sum(axis=1)
        out[:, 2] += wu.sum(axis=1)
        out[:, 3] += (wu * u).sum(axis=1)
        out[:, 4] += w @ ys
        out[:, 5] += wu @ ys
    return out


def curve_moments_1d(x, y, offsets, grid, h):
    """Per-curve 1-D moments, shape (n_curves, m, 6)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = grid.shape[0]
    u = (x[:, None] - grid[None, :]) / h
    w = _epan(u)
    wu = w * u
    contrib = np.empty((x.shape[0], m, N_MOM_1D))
    contrib[..., 0] = w > 0
    contrib[..., 1] = w
    contrib[..., 2] = wu
    contrib[..., 3] = wu * u
    contrib[..., 4] = w * y[:, None]
    contrib[..., 5] = wu * y[:, None]
    return np.add.reduceat(contrib, offsets[:-1], axis=0)


def moments_2d(s, t, g, grid, h):
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    m = grid.shape[0]
    out = np.zeros((m, m, N_MOM_2D))
    for lo in range(0, s.shape[0], _CHUNK):
        ss, ts, gs = s[lo:lo + _CHUNK], t[lo:lo + _CHUNK], g[lo:lo + _CHUNK]
        u = (ss[None, :] - grid[:, None]) / h
        v = (ts[None, :] - grid[:, None]) / h
        a = _epan(u)
        b = _epan(v)
        au = a * u
        bv = b * v
        ag = a * gs
        out[..., 0] += (a > 0).astype(np.float64) @ (b > 0).astype(np.float64).T
        out[..., 1] += a @ b.T
        out[..., 2] += au @ b.T
        out[..., 3] += a @ bv.T
        out[..., 4] += (au * u) @ b.T
        out[..., 5] += au @ bv.T
        out[..., 6] += a @ (bv * v).T
        out[..., 7] += ag @ b.T
        out[..., 8] += (au * gs) @ b.T
        out[..., 9] += ag @ bv.T
    return out


def solve_1d(mom):
    """Intercepts and degeneracy flags from 1-D moments (..., 6)."""
    c, s0, s1, s2, r0, r1 = (mom[..., i] for i in range(N_MOM_1D))
    half = 0.5 * (s0 + s2)
    lmax = half + np.sqrt((0.5 * (s0 - s2)) ** 2 + s1 * s1)
    det = s0 * s2 - s1 * s1
    with np.errstate(divide="ignore", invalid="ignore"):
        lmin = np.where(lmax > 0, det / lmax, 0.0)
        bad = (c < 2) | ~(lmax > 0) | (lmin < DEGEN_RTOL * lmax)
        beta0 = np.where(bad, np.nan, (s2 * r0 - s1 * r1) / np.where(bad, 1.0, det))
    return beta0, bad


def _sym3_extremes(a00, a01, a02, a11, a12, a22):
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    q = (a00 + a11 + a22) / 3.0
    b00, b11, b22 = a00 - q, a11 - q, a22 - q
    p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ps = np.where(p > 0, p, 1.0)
        c00, c11, c22 = b00 / ps, b11 / ps, b22 / ps
        c01, c02, c12 = a01 / ps, a02 / ps, a12 / ps
    detb = c00 * (c11 * c22 - c12 * c12) - c01 * (c01 * c22 - c12 * c02) + c02 * (c01 * c12 - c11 * c02)
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    emax = q + 2.0 * p * np.cos(phi)
    emin = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    return emin, emax


def solve_2d(mom):
    """Intercepts and degeneracy flags from 2-D moments (..., 10)."""
    c, s00, su, sv, suu, suv, svv, r0, ru, rv = (mom[..., i] for i in range(N_MOM_2D))
    emin, emax = _sym3_extremes(s00, su, sv, suu, suv, svv)
    m00 = suu * svv - suv * suv
    m01 = su * svv - sv * suv
    m02 = su * suv - sv * suu
    det = s00 * m00 - su * m01 + sv * m02
    bad = (c < 3) | ~(emax > 0) | (emin < DEGEN_RTOL * emax)
    with np.errstate(divide="ignore", invalid="ignore"):
        beta0 = np.where(bad, np.nan, (m00 * r0 - m01 * ru + m02 * rv) / np.where(bad, 1.0, det))
    return beta0, bad


def interp_grid_2d(grid, surf, s, t):
    """Bilinear interpolation of ``surf`` at points (s, t), clamped to the grid."""
    m = grid.shape[0]
    lo, hi = grid[0], grid[-1]
    step = (hi - lo) / (m - 1)
    fs = np.clip((np.asarray(s) - lo) / step, 0.0, m - 1.0)
    ft = np.clip((np.asarray(t) - lo) / step, 0.0, m - 1.0)
    i = np.minimum(fs.astype(np.int64), m - 2)
    j = np.minimum(ft.astype(np.int64), m - 2)
    a = fs - i
    b = ft - j
    return ((1 - a) * (1 - b) * surf[i, j] + a * (1 - b) * surf[i + 1, j]
            + (1 - a) * b * surf[i, j + 1] + a * b * surf[i + 1, j + 1])


def loo_cv_1d(x, y, offsets, grid, h):
    """Leave-one-curve-out squared error of the 1-D smoother.

    Returns ``(sse, degenerate)``; ``sse`` is nan when any fit is degenerate.
    """
    total = moments_1d(x, y, grid, h)
    full, bad = solve_1d(total)
    if bad.any():
        return np.nan, True
    per_curve = curve_moments_1d(x, y, offsets, grid, h)
    fits, bad = solve_1d(total[None, :, :] - per_curve)
    if bad.any():
        return np.nan, True
    sse = 0.0
    for c in range(offsets.shape[0] - 1):
        a, b = offsets[c], offsets[c + 1]
        pred = np.interp(x[a:b], grid, fits[c])
        sse += float(np.sum((y[a:b] - pred) ** 2))
    return sse, False


def loo_cv_2d(s, t, g, offsets, grid, h):
    """Leave-one-curve-out squared error of the 2-D smoother on raw covariances."""
    total = moments_2d(s, t, g, grid, h)
    full, bad = solve_2d(total)
    if bad.any():
        return np.nan, True
    sse = 0.0
    for c in range(offsets.shape[0] - 1):
        a, b = offsets[c], offsets[c + 1]
        if a == b:
            continue
        mc = moments_2d(s[a:b], t[a:b], g[a:b], grid, h)
        touched = mc[..., 0] > 0
        fit, bad = solve_2d(total[touched] - mc[touched])
        if bad.any():
            return np.nan, True
        surf = full.copy()
        surf[touched] = fit
        pred = interp_grid_2d(grid, surf, s[a:b], t[a:b])
        sse += float(np.sum((g[a:b] - pred) ** 2))
    return sse, False


def distance_matrix(means, traces):
    means = np.asarray(means, dtype=np.float64)
    traces = np.asarray(traces, dtype=np.float64)
    n = means.shape[0]
    out = np.empty((n, n))
    step = max(1, _CHUNK // max(1, n))
    for lo in range(0, n, step):
        diff = means[lo:lo + step, None, :] - means[None, :, :]
        sq = np.sum(diff * diff, axis=2) + (traces[lo:lo + step, None] + traces[None, :])
        out[lo:lo + step] = np.sqrt(sq)
    np.fill_diagonal(out, 0.0)
    return out


def max_triangle_violation(d):
    """max over (i, j, k) of d[i, j] - d[i, k] - d[k, j]."""
    d = np.asarray(d, dtype=np.float64)
    worst = -np.inf
    for k in range(d.shape[0]):
        gap = d - d[:, k][:, None] - d[k, :][None, :]
        worst = max(worst, float(gap.max()))
    return worst


def mds_loss_grad(x, delta, criterion):
    """Un-normalized loss numerator and its gradient.

    criterion: 0 = stress, 1 = s-stress, 2 = Sammon.
    """
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None, :] - x[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    d = np.sqrt(d2)
    iu = np.triu_indices(x.shape[0], 1)
    if criterion == 0:
        r = d - delta
        loss = float(np.sum(r[iu] ** 2))
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(d > 0, 2.0 * r / d, 0.0)
    elif criterion == 1:
        r = d2 - delta * delta
        loss = float(np.sum(r[iu] ** 2))
        coef = 4.0 * r
    else:
        pos = delta > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(pos, d - delta, 0.0)
            loss = float(np.sum((r * r / np.where(pos, delta, 1.0))[iu]))
            coef = np.where(pos & (d > 0), 2.0 * r / (np.where(pos, delta, 1.0) * d), 0.0)
    np.fill_diagonal(coef, 0.0)
    grad = np.einsum("ij,ijk->ik", coef, diff)
    return loss, grad
