"""Command-line driver: simulate, fit, scores, dist, mds, cluster, summarize, plot, pipeline.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 IO error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, plotting
from ._accel import backend_name
from .auctions import (
    build_trajectories,
    cluster_summary,
    determine_winners,
    parse_bids,
    remove_outliers,
    write_summary_csv,
)
from .clustering import kmeans, read_labels_csv, relabel_canonical, within_ss_report, write_labels_csv
from .distance import DistanceMatrix, distance_from_scores, score_table
from .errors import (
    DegenerateNeighborhood,
    MissingArtifact,
    NumericalError,
    SparseDistError,
    ValidationError,
)
from .fpca import FittedModel, estimate_mean, fit_model, select_k
from .scaling import metric_mds, read_embedding_csv
from .simulation import sample_curves, sample_planted_groups, spec_from_config, write_bids_csv
from .smoothing import Grid, cv_bandwidth_1d, local_linear_1d, Samples1D

log = logging.getLogger("sparsedist")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


@dataclass
class PipelineConfig:
    input: str | None = None
    out_dir: str = "out"
    data_kind: str = "bids"  # "bids" (positive amounts, 168 h auctions) or "synthetic"
    domain: list | None = None
    grid_size: int = 51
    bandwidth_mu: object = "cv"
    bandwidth_cov: object = "cv"
    bandwidth_v: object = "cv"
    fraction: float = 0.95
    k_components: int | None = None
    remove_outliers: bool = True
    increment: float = 0.0
    mds_criterion: str = "sstress"
    mds_dim: int = 2
    mds_max_iters: int = 2000
    mds_tol: float = 1e-9
    mds_restarts: int = 4
    kmeans_k: int = 6
    restarts: int = 20
    kmeans_max_iters: int = 300
    seed: int = 0
    threads: int = 1
    simulate: dict = field(default_factory=dict)

    def validate(self):
        if not 0 < self.fraction <= 1:
            raise ValidationError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.grid_size < 2:
            raise ValidationError("grid_size must be >= 2")
        if self.data_kind not in ("bids", "synthetic"):
            raise ValidationError(f"data_kind must be 'bids' or 'synthetic', got {self.data_kind!r}")
        if self.mds_criterion not in ("stress", "sstress", "sammon"):
            raise ValidationError(f"unknown MDS criterion {self.mds_criterion!r}")
        for name in ("bandwidth_mu", "bandwidth_cov", "bandwidth_v"):
            v = getattr(self, name)
            if v != "cv":
                try:
                    fv = float(v)
                except (TypeError, ValueError):
                    raise ValidationError(f"{name} must be a number or 'cv', got {v!r}") from None
                if not fv > 0:
                    raise ValidationError(f"{name} must be positive")
                setattr(self, name, fv)
        if self.input is not None and Path(self.input).resolve() == Path(self.out_dir).resolve():
            raise ValidationError("input and out_dir must differ")
        return self


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON config ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(cfg) - known
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return cfg


_FLAG_MAP = {
    "input": "input", "out_dir": "out_dir", "grid_size": "grid_size",
    "bandwidth_mu": "bandwidth_mu", "bandwidth_cov": "bandwidth_cov", "bandwidth_v": "bandwidth_v",
    "fraction": "fraction", "k_components": "k_components", "mds_criterion": "mds_criterion",
    "mds_dim": "mds_dim", "kmeans_k": "kmeans_k", "restarts": "restarts", "seed": "seed",
    "threads": "threads", "data_kind": "data_kind",
}


def build_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    for flag, key in _FLAG_MAP.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "n", None) is not None:
        cfg.setdefault("simulate", {})
        cfg["simulate"] = dict(cfg["simulate"], n=args.n)
    return PipelineConfig(**cfg).validate()


# -- stage helpers ---------------------------------------------------------------


def _out(cfg, name) -> Path:
    d = Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _need(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingArtifact(f"required artifact {p} does not exist")
    return p


def _bandwidth(v):
    return v if v == "cv" else float(v)


def load_trajectories(cfg: PipelineConfig):
    """Parse the input CSV into bidder trajectories."""
    if cfg.input is None:
        raise ValidationError("no --input given")
    path = _need(cfg.input)
    if cfg.data_kind == "bids":
        lo, hi = cfg.domain or (0.0, 168.0)
        records = parse_bids(path, duration=hi - lo, start=lo, require_positive=True)
    else:
        records = parse_bids(path, duration=None, require_positive=False)
    return build_trajectories(records)


def _grid(cfg, trajs):
    if cfg.domain is not None:
        lo, hi = cfg.domain
        return Grid(float(lo), float(hi), cfg.grid_size)
    return Grid.covering(np.concatenate([bt.trajectory.times for bt in trajs]), cfg.grid_size)


def _fit(cfg, bidder_trajs):
    """Outlier screening (if enabled) followed by the model fit."""
    grid = _grid(cfg, bidder_trajs)
    plain = [bt.trajectory for bt in bidder_trajs]
    report = None
    if cfg.remove_outliers:
        h = _bandwidth(cfg.bandwidth_mu)
        if h == "cv":
            h = cv_bandwidth_1d(plain, None, "mean", grid)
        mean = estimate_mean(plain, h, grid)
        bidder_trajs, report = remove_outliers(bidder_trajs, mean, grid)
        plain = [bt.trajectory for bt in bidder_trajs]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = fit_model(plain, grid, _bandwidth(cfg.bandwidth_mu), _bandwidth(cfg.bandwidth_cov),
                          _bandwidth(cfg.bandwidth_v))
    K = cfg.k_components or select_k(model.eigenvalues, cfg.fraction)
    K = min(int(K), model.n_components)
    return bidder_trajs, model, K, report


def _write_kept(path, bidder_trajs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["auction_id", "bidder_id", "bid_time_hours", "bid_amount"])
        for bt in bidder_trajs:
            for t, y in zip(bt.trajectory.times, bt.trajectory.values):
                w.writerow([bt.auction_id, bt.bidder_id, repr(float(t)), repr(float(y))])


def _write_diagnostics(cfg, model, K, report, n_traj):
    frac = model.variance_fractions()
    with open(_out(cfg, "diagnostics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "eigenvalue", "percent", "cumulative_percent"])
        for k, (lam, f, c) in enumerate(zip(model.eigenvalues, frac, np.cumsum(frac)), start=1):
            w.writerow([k, repr(float(lam)), repr(100 * float(f)), repr(100 * float(c))])
    info = {
        "n_trajectories": n_traj,
        "sigma2": model.sigma2,
        "sigma2_clamped": model.sigma2_clamped,
        "bandwidths": model.bandwidths,
        "K": K,
        "fraction": cfg.fraction,
        "outliers": None if report is None else {
            "residual_sd": report.residual_sd,
            "outlying_bids": len(report.outlying_bids),
            "trajectories_removed": len(report.removed),
            "bids_removed": report.n_removed_bids,
        },
    }
    with open(_out(cfg, "diagnostics.json"), "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
    if report is not None:
        report.to_csv(_out(cfg, "removed_outliers.csv"))
    return info


# -- commands ----------------------------------------------------------------------


def cmd_simulate(cfg: PipelineConfig) -> Path:
    sim = dict(cfg.simulate or {})
    n = int(sim.get("n", 400))
    if n < 1:
        raise ValidationError(f"simulate.n must be >= 1, got {n}")
    spec = spec_from_config(sim)
    groups = sim.get("group_means")
    if groups is not None:
        per = max(1, n // len(groups))
        curves = sample_planted_groups(spec, np.asarray(groups, dtype=float), per, cfg.seed,
                                       sim.get("within_var"))
    else:
        curves = sample_curves(spec, n, cfg.seed)
    path = _out(cfg, "simulated.csv")
    rows = write_bids_csv(curves, path)
    auction = "SIM"
    write_labels_csv(_out(cfg, "truth_labels.csv"),
                     [f"{auction}/{c.trajectory.id}" for c in curves], [c.group + 1 for c in curves])
    with open(_out(cfg, "simulate_log.json"), "w") as fh:
        json.dump({"n_curves": len(curves), "rows": rows, "seed": cfg.seed, "spec": sim,
                   "rng": "numpy.PCG64/SeedSequence.spawn"}, fh, indent=2, sort_keys=True)
    log.info("simulated %d curves, %d rows -> %s", len(curves), rows, path)
    return path


def cmd_fit(cfg: PipelineConfig):
    trajs = load_trajectories(cfg)
    kept, model, K, report = _fit(cfg, trajs)
    model.save(_out(cfg, "model.json"))
    _write_kept(_out(cfg, "kept_bids.csv"), kept)
    info = _write_diagnostics(cfg, model, K, report, len(kept))
    log.info("fitted %d trajectories: K=%d sigma2=%.4g", len(kept), K, model.sigma2)
    return kept, model, K, info


def _model_and_kept(cfg):
    model = FittedModel.load(_need(_out(cfg, "model.json")))
    with open(_need(_out(cfg, "diagnostics.json"))) as fh:
        K = cfg.k_components or json.load(fh)["K"]
    kept = build_trajectories(parse_bids(_need(_out(cfg, "kept_bids.csv")), duration=None,
                                         require_positive=False))
    return model, int(K), kept


def cmd_scores(cfg: PipelineConfig):
    model, K, kept = _model_and_kept(cfg)
    scores = score_table([bt.trajectory for bt in kept], model, K)
    with open(_out(cfg, "scores.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"xi{k + 1}" for k in range(K)] + ["trace_cov"])
        for bt, s in zip(kept, scores):
            w.writerow([bt.trajectory.id] + [repr(float(v)) for v in s.mean] + [repr(s.trace)])
    return scores


def cmd_dist(cfg: PipelineConfig) -> DistanceMatrix:
    model, K, kept = _model_and_kept(cfg)
    scores = score_table([bt.trajectory for bt in kept], model, K)
    dm = DistanceMatrix([bt.trajectory.id for bt in kept], distance_from_scores(scores), K)
    dm.to_csv(_out(cfg, "distances.csv"))
    return dm


def cmd_mds(cfg: PipelineConfig):
    dm = DistanceMatrix.from_csv(_need(_out(cfg, "distances.csv")))
    emb = metric_mds(dm, cfg.mds_dim, cfg.mds_criterion, cfg.mds_max_iters, cfg.mds_tol,
                     cfg.mds_restarts, cfg.seed, cfg.threads)
    emb.to_csv(_out(cfg, "embedding.csv"))
    with open(_out(cfg, "mds.json"), "w") as fh:
        json.dump({"criterion": emb.criterion, "value": emb.value, "iterations": emb.iterations,
                   "converged": emb.converged, "restart_values": emb.restart_values}, fh, indent=2)
    if not emb.converged:
        log.warning("MDS (%s) did not converge in %d iterations", emb.criterion, emb.iterations)
    return emb


def cmd_cluster(cfg: PipelineConfig):
    ids, pts = read_embedding_csv(_need(_out(cfg, "embedding.csv")))
    res = relabel_canonical(kmeans(pts, cfg.kmeans_k, cfg.restarts, cfg.kmeans_max_iters, cfg.seed,
                                   cfg.threads))
    write_labels_csv(_out(cfg, "labels.csv"), ids, res.labels)
    ks = range(1, min(len(ids), max(cfg.kmeans_k + 4, 10)) + 1)
    with open(_out(cfg, "within_ss.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "within_ss"])
        for k, wss in within_ss_report(pts, ks, restarts=min(cfg.restarts, 5), seed=cfg.seed):
            w.writerow([k, repr(wss)])
    return ids, res


def _aligned_labels(cfg, kept):
    ids, labels = read_labels_csv(_need(_out(cfg, "labels.csv")))
    lookup = dict(zip(ids, labels))
    missing = [bt.trajectory.id for bt in kept if bt.trajectory.id not in lookup]
    if missing:
        raise ValidationError(f"{len(missing)} trajectories have no label (first: {missing[0]})")
    return [int(lookup[bt.trajectory.id]) for bt in kept]


def cmd_summarize(cfg: PipelineConfig):
    _, _, kept = _model_and_kept(cfg)
    labels = _aligned_labels(cfg, kept)
    outcomes = determine_winners(kept, cfg.increment)
    rows = cluster_summary(kept, labels, outcomes)
    write_summary_csv(rows, _out(cfg, "summary.csv"))
    return rows


def cluster_mean_curves(model: FittedModel, kept, labels) -> dict:
    """Smoothed mean curve of each cluster, widening the bandwidth if needed."""
    out = {}
    base = model.bandwidths.get("mu") or model.grid.width / 5
    for lab in sorted(set(labels)):
        trs = [bt.trajectory for bt, l in zip(kept, labels) if l == lab]
        t = np.concatenate([tr.times for tr in trs])
        y = np.concatenate([tr.values for tr in trs])
        h = base
        for _ in range(12):
            try:
                out[lab] = local_linear_1d(Samples1D.from_arrays(t, y), h, model.grid)
                break
            except DegenerateNeighborhood:
                h *= 1.5
    return out


PLOT_KINDS = ("embedding", "mean_curves", "trajectories", "histograms")


def cmd_plot(cfg: PipelineConfig, kinds=PLOT_KINDS) -> list[Path]:
    written = []
    for kind in kinds:
        if kind not in PLOT_KINDS:
            raise ValidationError(f"unknown plot kind {kind!r}")
        if kind == "embedding":
            ids, pts = read_embedding_csv(_need(_out(cfg, "embedding.csv")))
            lab_ids, labels = read_labels_csv(_need(_out(cfg, "labels.csv")))
            lookup = dict(zip(lab_ids, labels))
            svg = plotting.embedding_svg(pts, [lookup.get(i, 0) for i in ids])
            written.append(_write_svg(cfg, "plot_embedding.svg", svg))
            continue
        model, _, kept = _model_and_kept(cfg)
        labels = _aligned_labels(cfg, kept)
        if kind == "mean_curves":
            curves = cluster_mean_curves(model, kept, labels)
            svg = plotting.mean_curves_svg(model.grid.points, curves, model.mean)
            written.append(_write_svg(cfg, "plot_mean_curves.svg", svg))
        elif kind == "trajectories":
            svg = plotting.trajectories_svg([bt.trajectory for bt in kept], labels, model.mean,
                                            model.grid.points)
            written.append(_write_svg(cfg, "plot_trajectories.svg", svg))
        else:
            g = model.grid
            allv = np.concatenate([bt.trajectory.values for bt in kept])
            for lab in sorted(set(labels)):
                members = [bt for bt, l in zip(kept, labels) if l == lab]
                times = np.concatenate([bt.trajectory.times for bt in members])
                vals = np.concatenate([bt.trajectory.values for bt in members])
                svg_t = plotting.histogram_svg(times, 20, (g.lower, g.upper),
                                               f"Bid times, cluster {lab}", "time")
                svg_a = plotting.histogram_svg(vals, 20, (float(allv.min()), float(allv.max())),
                                               f"Bid amounts, cluster {lab}", "amount")
                written.append(_write_svg(cfg, f"plot_hist_times_{lab}.svg", svg_t))
                written.append(_write_svg(cfg, f"plot_hist_amounts_{lab}.svg", svg_a))
    return written


def _write_svg(cfg, name, svg):
    p = _out(cfg, name)
    p.write_text(svg)
    return p


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


STAGES = ("fit", "dist", "mds", "cluster", "summarize", "plot")


def cmd_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage (after ``simulate`` when no input is given) and write a manifest."""
    if cfg.input is None:
        _run_stage("simulate", cmd_simulate, cfg)
        cfg.input = str(_out(cfg, "simulated.csv"))
        cfg.data_kind = "synthetic"
    for name in STAGES:
        _run_stage(name, globals()[f"cmd_{name}"], cfg)
    out_dir = Path(cfg.out_dir)
    artifacts = sorted(p.name for p in out_dir.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "package": "sparsedist",
        "version": __version__,
        "backend": backend_name(),
        "numpy": np.__version__,
        "seed": cfg.seed,
        "config": {k: v for k, v in asdict(cfg).items() if k not in ("out_dir",)},
        "digests": {name: _digest(out_dir / name) for name in artifacts},
    }
    manifest["config"]["input"] = os.path.basename(str(cfg.input))
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage, self.exc = stage, exc
        super().__init__(f"stage '{stage}' failed: {exc}")


def _run_stage(name, fn, cfg):
    try:
        return fn(cfg)
    except (SparseDistError, OSError, ValueError, ArithmeticError) as exc:
        raise StageError(name, exc) from exc


# -- argument parsing ------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--input")
    p.add_argument("--config")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--data-kind", dest="data_kind", choices=["bids", "synthetic"])
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--bandwidth-mu", dest="bandwidth_mu")
    p.add_argument("--bandwidth-cov", dest="bandwidth_cov")
    p.add_argument("--bandwidth-v", dest="bandwidth_v")
    p.add_argument("--fraction", type=float)
    p.add_argument("--k-components", dest="k_components", type=int)
    p.add_argument("--mds-criterion", dest="mds_criterion", choices=["stress", "sstress", "sammon"])
    p.add_argument("--mds-dim", dest="mds_dim", type=int)
    p.add_argument("--kmeans-k", dest="kmeans_k", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsedist", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "scores", "dist", "mds", "cluster", "summarize", "plot", "pipeline"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "simulate":
            p.add_argument("--n", type=int)
        if name == "plot":
            p.add_argument("--kind", action="append", choices=PLOT_KINDS)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        os.environ.setdefault("NUMBA_NUM_THREADS", str(args.threads))
    try:
        cfg = build_config(args)
        cmd = args.command
        if cmd == "plot":
            _run_stage("plot", lambda c: cmd_plot(c, args.kind or PLOT_KINDS), cfg)
        else:
            _run_stage(cmd, globals()[f"cmd_{cmd}"], cfg)
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return _exit_code(err.exc)
    except (SparseDistError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK


def _exit_code(exc) -> int:
    if isinstance(exc, (MissingArtifact, OSError)):
        return EXIT_IO
    if isinstance(exc, NumericalError) or isinstance(exc, ArithmeticError):
        return EXIT_NUMERICAL
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
