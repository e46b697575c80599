"""numba twins of ``_kernels_numpy``; same signatures, same moment layouts."""
import math

import numpy as np
from numba import njit

from ._kernels_numpy import DEGEN_RTOL, N_MOM_1D, N_MOM_2D


@njit(cache=True)
def _support(grid, x, h):
    m = grid.shape[0]
    step = (grid[m - 1] - grid[0]) / (m - 1)
    k0 = int(math.floor((x - h - grid[0]) / step)) - 1
    k1 = int(math.ceil((x + h - grid[0]) / step)) + 1
    if k0 < 0:
        k0 = 0
    if k1 > m - 1:
        k1 = m - 1
    return k0, k1


@njit(cache=True)
def _acc_1d(out, x, y, grid, h):
    for n in range(x.shape[0]):
        k0, k1 = _support(grid, x[n], h)
        for k in range(k0, k1 + 1):
            u = (x[n] - grid[k]) / h
            if abs(u) < 1.0:
                w = 0.75 * (1.0 - u * u)
                wu = w * u
                out[k, 0] += 1.0
                out[k, 1] += w
                out[k, 2] += wu
                out[k, 3] += wu * u
                out[k, 4] += w * y[n]
                out[k, 5] += wu * y[n]


@njit(cache=True)
def moments_1d(x, y, grid, h):
    out = np.zeros((grid.shape[0], N_MOM_1D))
    _acc_1d(out, x, y, grid, h)
    return out


@njit(cache=True)
def curve_moments_1d(x, y, offsets, grid, h):
    nc = offsets.shape[0] - 1
    out = np.zeros((nc, grid.shape[0], N_MOM_1D))
    for c in range(nc):
        _acc_1d(out[c], x[offsets[c]:offsets[c + 1]], y[offsets[c]:offsets[c + 1]], grid, h)
    return out


@njit(cache=True)
def _acc_2d(out, s, t, g, grid, h, box):
    for n in range(s.shape[0]):
        a0, a1 = _support(grid, s[n], h)
        b0, b1 = _support(grid, t[n], h)
        box[0] = min(box[0], a0)
        box[1] = max(box[1], a1)
        box[2] = min(box[2], b0)
        box[3] = max(box[3], b1)
        for a in range(a0, a1 + 1):
            u = (s[n] - grid[a]) / h
            if abs(u) >= 1.0:
                continue
            ka = 0.75 * (1.0 - u * u)
            for b in range(b0, b1 + 1):
                v = (t[n] - grid[b]) / h
                if abs(v) >= 1.0:
                    continue
                w = ka * 0.75 * (1.0 - v * v)
                wu = w * u
                wv = w * v
                o = out[a, b]
                o[0] += 1.0
                o[1] += w
                o[2] += wu
                o[3] += wv
                o[4] += wu * u
                o[5] += wu * v
                o[6] += wv * v
                o[7] += w * g[n]
                o[8] += wu * g[n]
                o[9] += wv * g[n]


@njit(cache=True)
def moments_2d(s, t, g, grid, h):
    m = grid.shape[0]
    out = np.zeros((m, m, N_MOM_2D))
    box = np.array([m, -1, m, -1])
    _acc_2d(out, s, t, g, grid, h, box)
    return out


@njit(cache=True)
def _solve1(c, s0, s1, s2, r0, r1):
    lmax = 0.5 * (s0 + s2) + math.sqrt((0.5 * (s0 - s2)) ** 2 + s1 * s1)
    det = s0 * s2 - s1 * s1
    if c < 2 or not lmax > 0:
        return np.nan, True
    if det / lmax < DEGEN_RTOL * lmax:
        return np.nan, True
    return (s2 * r0 - s1 * r1) / det, False


@njit(cache=True)
def solve_1d(mom):
    flat = mom.reshape(-1, N_MOM_1D)
    beta = np.empty(flat.shape[0])
    bad = np.empty(flat.shape[0], dtype=np.bool_)
    for i in range(flat.shape[0]):
        r = flat[i]
        beta[i], bad[i] = _solve1(r[0], r[1], r[2], r[3], r[4], r[5])
    return beta.reshape(mom.shape[:-1]), bad.reshape(mom.shape[:-1])


@njit(cache=True)
def _solve3(r):
    c, s00, su, sv, suu, suv, svv, r0, ru, rv = r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8], r[9]
    if c < 3:
        return np.nan, True
    p1 = su * su + sv * sv + suv * suv
    q = (s00 + suu + svv) / 3.0
    b00, b11, b22 = s00 - q, suu - q, svv - q
    p = math.sqrt((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * p1) / 6.0)
    if p > 0:
        c00, c11, c22 = b00 / p, b11 / p, b22 / p
        c01, c02, c12 = su / p, sv / p, suv / p
        detb = c00 * (c11 * c22 - c12 * c12) - c01 * (c01 * c22 - c12 * c02) + c02 * (c01 * c12 - c11 * c02)
        rr = min(1.0, max(-1.0, detb / 2.0))
        phi = math.acos(rr) / 3.0
        emax = q + 2.0 * p * math.cos(phi)
        emin = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    else:
        emax = emin = q
    if not emax > 0 or emin < DEGEN_RTOL * emax:
        return np.nan, True
    m00 = suu * svv - suv * suv
    m01 = su * svv - sv * suv
    m02 = su * suv - sv * suu
    det = s00 * m00 - su * m01 + sv * m02
    return (m00 * r0 - m01 * ru + m02 * rv) / det, False


@njit(cache=True)
def solve_2d(mom):
    flat = mom.reshape(-1, N_MOM_2D)
    beta = np.empty(flat.shape[0])
    bad = np.empty(flat.shape[0], dtype=np.bool_)
    for i in range(flat.shape[0]):
        beta[i], bad[i] = _solve3(flat[i])
    return beta.reshape(mom.shape[:-1]), bad.reshape(mom.shape[:-1])


@njit(cache=True)
def _interp1(grid, f, x):
    m = grid.shape[0]
    if x <= grid[0]:
        return f[0]
    if x >= grid[m - 1]:
        return f[m - 1]
    step = (grid[m - 1] - grid[0]) / (m - 1)
    i = min(int((x - grid[0]) / step), m - 2)
    while i > 0 and x < grid[i]:
        i -= 1
    while i < m - 2 and x > grid[i + 1]:
        i += 1
    a = (x - grid[i]) / (grid[i + 1] - grid[i])
    return (1.0 - a) * f[i] + a * f[i + 1]


@njit(cache=True)
def _interp2(grid, surf, s, t):
    m = grid.shape[0]
    lo = grid[0]
    step = (grid[m - 1] - lo) / (m - 1)
    fs = min(max((s - lo) / step, 0.0), m - 1.0)
    ft = min(max((t - lo) / step, 0.0), m - 1.0)
    i = min(int(fs), m - 2)
    j = min(int(ft), m - 2)
    a = fs - i
    b = ft - j
    return ((1 - a) * (1 - b) * surf[i, j] + a * (1 - b) * surf[i + 1, j]
            + (1 - a) * b * surf[i, j + 1] + a * b * surf[i + 1, j + 1])


def interp_grid_2d(grid, surf, s, t):
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    return _interp2_vec(grid, surf, s, t)


@njit(cache=True)
def _interp2_vec(grid, surf, s, t):
    out = np.empty(s.shape[0])
    for n in range(s.shape[0]):
        out[n] = _interp2(grid, surf, s[n], t[n])
    return out


@njit(cache=True)
def loo_cv_1d(x, y, offsets, grid, h):
    m = grid.shape[0]
    total = moments_1d(x, y, grid, h)
    full = np.empty(m)
    for k in range(m):
        r = total[k]
        full[k], bad = _solve1(r[0], r[1], r[2], r[3], r[4], r[5])
        if bad:
            return np.nan, True
    scratch = np.zeros((m, N_MOM_1D))
    fit = np.empty(m)
    sse = 0.0
    for c in range(offsets.shape[0] - 1):
        a, b = offsets[c], offsets[c + 1]
        scratch[:] = 0.0
        _acc_1d(scratch, x[a:b], y[a:b], grid, h)
        for k in range(m):
            if scratch[k, 0] > 0:
                r = total[k] - scratch[k]
                fit[k], bad = _solve1(r[0], r[1], r[2], r[3], r[4], r[5])
                if bad:
                    return np.nan, True
            else:
                fit[k] = full[k]
        for n in range(a, b):
            e = y[n] - _interp1(grid, fit, x[n])
            sse += e * e
    return sse, False


@njit(cache=True)
def loo_cv_2d(s, t, g, offsets, grid, h):
    m = grid.shape[0]
    total = moments_2d(s, t, g, grid, h)
    full = np.empty((m, m))
    for a in range(m):
        for b in range(m):
            full[a, b], bad = _solve3(total[a, b])
            if bad:
                return np.nan, True
    surf = full.copy()
    scratch = np.zeros((m, m, N_MOM_2D))
    tmp = np.empty(N_MOM_2D)
    box = np.empty(4, dtype=np.int64)
    sse = 0.0
    for c in range(offsets.shape[0] - 1):
        lo, hi = offsets[c], offsets[c + 1]
        if lo == hi:
            continue
        box[0] = m
        box[1] = -1
        box[2] = m
        box[3] = -1
        _acc_2d(scratch, s[lo:hi], t[lo:hi], g[lo:hi], grid, h, box)
        for a in range(box[0], box[1] + 1):
            for b in range(box[2], box[3] + 1):
                if scratch[a, b, 0] > 0:
                    for q in range(N_MOM_2D):
                        tmp[q] = total[a, b, q] - scratch[a, b, q]
                    val, bad = _solve3(tmp)
                    if bad:
                        return np.nan, True
                    surf[a, b] = val
        for n in range(lo, hi):
            e = g[n] - _interp2(grid, surf, s[n], t[n])
            sse += e * e
        for a in range(box[0], box[1] + 1):
            for b in range(box[2], box[3] + 1):
                surf[a, b] = full[a, b]
                for q in range(N_MOM_2D):
                    scratch[a, b, q] = 0.0
    return sse, False


@njit(cache=True)
def distance_matrix(means, traces):
    n, k = means.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for q in range(k):
                dq = means[i, q] - means[j, q]
                acc += dq * dq
            v = math.sqrt(acc + (traces[i] + traces[j]))
            out[i, j] = v
            out[j, i] = v
    return out


@njit(cache=True)
def max_triangle_violation(d):
    n = d.shape[0]
    worst = -np.inf
    for k in range(n):
        for i in range(n):
            dik = d[i, k]
            for j in range(n):
                gap = d[i, j] - dik - d[k, j]
                if gap > worst:
                    worst = gap
    return worst


@njit(cache=True)
def _mds_loss_grad(x, delta, criterion):
    n, p = x.shape
    grad = np.zeros((n, p))
    loss = 0.0
    diff = np.empty(p)
    for i in range(n):
        for j in range(i + 1, n):
            d2 = 0.0
            for q in range(p):
                diff[q] = x[i, q] - x[j, q]
                d2 += diff[q] * diff[q]
            d = math.sqrt(d2)
            dl = delta[i, j]
            if criterion == 0:
                r = d - dl
                loss += r * r
                coef = 2.0 * r / d if d > 0 else 0.0
            elif criterion == 1:
                r = d2 - dl * dl
                loss += r * r
                coef = 4.0 * r
            else:
                if dl <= 0:
                    continue
                r = d - dl
                loss += r * r / dl
                coef = 2.0 * r / (dl * d) if d > 0 else 0.0
            for q in range(p):
                grad[i, q] += coef * diff[q]
                grad[j, q] -= coef * diff[q]
    return loss, grad


def mds_loss_grad(x, delta, criterion):
    return _mds_loss_grad(np.ascontiguousarray(x, dtype=np.float64),
                          np.ascontiguousarray(delta, dtype=np.float64), int(criterion))
