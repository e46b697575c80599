"""Self-contained SVG figures: embeddings, curves and histograms."""
from __future__ import annotations

from html import escape
from typing import Mapping, Sequence

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

W, H, PAD = 640, 480, 56


def _color(label, labels_sorted):
    return PALETTE[labels_sorted.index(label) % len(PALETTE)]


class _Axes:
    def __init__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.x0, self.x1 = _span(x)
        self.y0, self.y1 = _span(y)

    def px(self, x):
        return PAD + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (W - 2 * PAD)

    def py(self, y):
        return H - PAD - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * (H - 2 * PAD)

    def frame(self, title, xlabel, ylabel):
        out = [f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
               f'fill="none" stroke="#333"/>',
               f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="16">{escape(title)}</text>',
               f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
               f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>']
        for v in np.linspace(self.x0, self.x1, 5):
            out.append(f'<text x="{self.px(v):.2f}" y="{H - PAD + 16}" text-anchor="middle" '
                       f'font-size="10">{v:.3g}</text>')
        for v in np.linspace(self.y0, self.y1, 5):
            out.append(f'<text x="{PAD - 6}" y="{self.py(v):.2f}" text-anchor="end" '
                       f'font-size="10">{v:.3g}</text>')
        return out


def _span(v):
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def _doc(body):
    return ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def _legend(labels_sorted):
    out = []
    for n, lab in enumerate(labels_sorted):
        y = PAD + 14 + 16 * n
        out.append(f'<rect class="legend" x="{W - PAD + 6}" y="{y - 9}" width="10" height="10" '
                   f'fill="{_color(lab, labels_sorted)}"/>')
        out.append(f'<text x="{W - PAD + 20}" y="{y}" font-size="11">{escape(str(lab))}</text>')
    return out


def embedding_svg(points, labels=None, title="MDS configuration") -> str:
    """Scatter of the first two coordinates, one colour per cluster label."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 or pts.shape[1] == 1:
        pts = np.column_stack([pts.ravel(), np.zeros(pts.shape[0])])
    labels = [1] * pts.shape[0] if labels is None else list(labels)
    uniq = sorted(set(labels))
    ax = _Axes(pts[:, 0], pts[:, 1])
    body = ax.frame(title, "coordinate 1", "coordinate 2")
    for (x, y), lab in zip(pts, labels):
        body.append(f'<circle class="marker" data-label="{escape(str(lab))}" cx="{ax.px(x):.2f}" '
                    f'cy="{ax.py(y):.2f}" r="3" fill="{_color(lab, uniq)}" fill-opacity="0.8"/>')
    body += _legend(uniq)
    return _doc(body)


def _polyline(ax, x, y, color, cls, width=1.0, opacity=1.0):
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(ax.px(x), ax.py(y)))
    return (f'<polyline class="{cls}" points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}" stroke-opacity="{opacity}"/>')


def mean_curves_svg(grid_points, curves: Mapping, overall=None, title="Mean trajectories") -> str:
    """One polyline per cluster mean curve plus the overall mean in black."""
    x = np.asarray(grid_points, dtype=float)
    uniq = sorted(curves)
    allv = [np.asarray(v, dtype=float) for v in curves.values()]
    if overall is not None:
        allv.append(np.asarray(overall, dtype=float))
    ax = _Axes(x, np.concatenate(allv) if allv else np.zeros(1))
    body = ax.frame(title, "time", "value")
    for lab in uniq:
        body.append(_polyline(ax, x, curves[lab], _color(lab, uniq), "cluster-mean", 2.0))
    if overall is not None:
        body.append(_polyline(ax, x, overall, "#000", "overall-mean", 2.5))
    body += _legend(uniq)
    return _doc(body)


def trajectories_svg(trajectories: Sequence, labels=None, mean=None, grid_points=None,
                     title="Trajectories") -> str:
    labels = [1] * len(trajectories) if labels is None else list(labels)
    uniq = sorted(set(labels))
    xs = np.concatenate([tr.times for tr in trajectories])
    ys = np.concatenate([tr.values for tr in trajectories])
    ax = _Axes(xs, ys)
    body = ax.frame(title, "time", "value")
    for tr, lab in zip(trajectories, labels):
        c = _color(lab, uniq)
        if len(tr) > 1:
            body.append(_polyline(ax, tr.times, tr.values, c, "trajectory", 0.8, 0.6))
        else:
            body.append(f'<circle class="trajectory" cx="{ax.px(tr.times[0]):.2f}" '
                        f'cy="{ax.py(tr.values[0]):.2f}" r="1.5" fill="{c}"/>')
    if mean is not None and grid_points is not None:
        body.append(_polyline(ax, grid_points, mean, "#000", "overall-mean", 2.5))
    body += _legend(uniq)
    return _doc(body)


def histogram_counts(values, bins, value_range=None):
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=value_range)
    return counts, edges


def histogram_svg(values, bins: int = 20, value_range=None, title="Histogram", xlabel="value",
                  color=PALETTE[0]) -> str:
    counts, edges = histogram_counts(values, bins, value_range)
    ax = _Axes(edges, np.array([0.0, max(1, counts.max(initial=0))]))
    ax.y0 = 0.0
    body = ax.frame(title, xlabel, "count")
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        x0, x1 = ax.px(a), ax.px(b)
        y0, y1 = ax.py(c), ax.py(0)
        body.append(f'<rect class="bar" data-count="{int(c)}" x="{x0:.2f}" y="{y0:.2f}" '
                    f'width="{max(x1 - x0 - 1, 0.5):.2f}" height="{y1 - y0:.2f}" fill="{color}"/>')
    return _doc(body)
