"""Time the numba kernels against their numpy twins.

Run with ``python benchmarks/bench_kernels.py [--n-curves 1600] [--repeat 5]``.
The first numba call (JIT compile / cache load) is excluded from timings.
"""
import argparse
import time

import numpy as np

from sparsedist import kernels
from sparsedist.simulation import default_spec, sample_curves


def _time(fn, repeat):
    fn()  # warm-up
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_inputs(n_curves, m, seed=0):
    curves = sample_curves(default_spec(), n_curves, seed=seed)
    x = np.concatenate([c.trajectory.times for c in curves])
    y = np.concatenate([c.trajectory.values for c in curves])
    offsets = np.concatenate([[0], np.cumsum([len(c.trajectory) for c in curves])]).astype(np.int64)
    s, t, g, off2 = [], [], [], [0]
    for c in curves:
        xi, yi = c.trajectory.times, c.trajectory.values
        j, l = np.where(~np.eye(xi.size, dtype=bool))
        s.append(xi[j])
        t.append(xi[l])
        g.append(yi[j] * yi[l])
        off2.append(off2[-1] + j.size)
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((300, 2))
    delta = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    return dict(
        x=x, y=y, offsets=offsets, grid=np.linspace(0, 1, m),
        s=np.concatenate(s), t=np.concatenate(t), g=np.concatenate(g),
        off2=np.asarray(off2, dtype=np.int64),
        means=rng.standard_normal((n_curves, 3)), traces=rng.uniform(0, 1, n_curves),
        x_mds=pts + 0.1 * rng.standard_normal(pts.shape), delta=delta,
    )


def cases(k, d):
    return {
        "moments_1d": lambda: k.moments_1d(d["x"], d["y"], d["grid"], 0.1),
        "moments_2d": lambda: k.moments_2d(d["s"], d["t"], d["g"], d["grid"], 0.1),
        "loo_cv_1d": lambda: k.loo_cv_1d(d["x"], d["y"], d["offsets"], d["grid"], 0.1),
        "loo_cv_2d": lambda: k.loo_cv_2d(d["s"], d["t"], d["g"], d["off2"], d["grid"], 0.1),
        "distance_matrix": lambda: k.distance_matrix(d["means"], d["traces"]),
        "mds_loss_grad": lambda: k.mds_loss_grad(d["x_mds"], d["delta"], 1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-curves", type=int, default=1600)
    ap.add_argument("--grid-size", type=int, default=51)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.numba_kernels is None:
        raise SystemExit("numba is not installed; nothing to compare")
    d = build_inputs(args.n_curves, args.grid_size)
    print(f"{args.n_curves} curves, {d['x'].size} points, {d['s'].size} raw covariances, "
          f"grid {args.grid_size}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    np_cases = cases(kernels.numpy_kernels, d)
    nb_cases = cases(kernels.numba_kernels, d)
    for name in np_cases:
        a = _time(np_cases[name], args.repeat)
        b = _time(nb_cases[name], args.repeat)
        print(f"{name:<18}{1e3 * a:>12.2f}{1e3 * b:>12.2f}{a / b:>9.1f}x")


if __name__ == "__main__":
    main()
