"""Bid histories: ingestion, bidder trajectories, outliers, winners, summaries."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, LabelMismatch, ParseError, ValidationError
from .fpca import SparseTrajectory

BID_COLUMNS = ("auction_id", "bidder_id", "bid_time_hours", "bid_amount")
AUCTION_HOURS = 168.0


@dataclass(frozen=True)
class BidRecord:
    auction_id: str
    bidder_id: str
    time: float
    amount: float


@dataclass(frozen=True)
class BidderTrajectory:
    key: tuple
    trajectory: SparseTrajectory

    @property
    def auction_id(self) -> str:
        return self.key[0]

    @property
    def bidder_id(self) -> str:
        return self.key[1]


def trajectory_id(auction_id: str, bidder_id: str) -> str:
    return f"{auction_id}/{bidder_id}"


def parse_bids(
    source,
    duration: float | None = AUCTION_HOURS,
    start: float = 0.0,
    require_positive: bool = True,
) -> list[BidRecord]:
    """Read and validate a bids CSV (path, file object or text).

    Times must lie in ``[start, start + duration]``; ``duration=None``
    skips the check.

    Every malformed row is collected; if any exist a :class:`ParseError`
    carries all of them with their line numbers.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyInput("bids input is empty") from None
    missing = [c for c in BID_COLUMNS if c not in header]
    if missing:
        raise ParseError([(1, f"missing column(s) {', '.join(missing)}")])
    col = {c: header.index(c) for c in BID_COLUMNS}
    records, errors = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            errors.append((lineno, f"expected {len(header)} fields, got {len(row)}"))
            continue
        auction, bidder = row[col["auction_id"]].strip(), row[col["bidder_id"]].strip()
        if not auction or not bidder:
            errors.append((lineno, "empty auction or bidder id"))
            continue
        try:
            t = float(row[col["bid_time_hours"]])
            y = float(row[col["bid_amount"]])
        except ValueError:
            errors.append((lineno, "non-numeric time or amount"))
            continue
        if not (math.isfinite(t) and math.isfinite(y)):
            errors.append((lineno, "non-finite time or amount"))
        elif duration is not None and not start <= t <= start + duration:
            errors.append((lineno, f"time {t:g} outside [{start:g}, {start + duration:g}]"))
        elif require_positive and not y > 0:
            errors.append((lineno, f"amount {y:g} must be positive"))
        else:
            records.append(BidRecord(auction, bidder, t, y))
    if errors:
        raise ParseError(errors)
    if not records:
        raise EmptyInput("bids input has no data rows")
    return records


def build_trajectories(records: Iterable[BidRecord]) -> list[BidderTrajectory]:
    """Group bids by (auction, bidder); output sorted by key."""
    groups: dict[tuple, list] = defaultdict(list)
    for r in records:
        groups[(r.auction_id, r.bidder_id)].append((r.time, r.amount))
    if not groups:
        raise EmptyInput("no bid records")
    out = []
    for key in sorted(groups):
        bids = sorted(groups[key])
        t, y = zip(*bids)
        out.append(BidderTrajectory(key, SparseTrajectory(trajectory_id(*key), t, y)))
    return out


@dataclass
class OutlierReport:
    removed: list  # BidderTrajectory
    outlying_bids: list  # (auction_id, bidder_id, time, amount, residual)
    residual_sd: float
    threshold: float

    @property
    def n_removed_bids(self) -> int:
        return sum(len(bt.trajectory) for bt in self.removed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["auction_id", "bidder_id", "time", "amount", "residual"])
            for row in self.outlying_bids:
                w.writerow([row[0], row[1], repr(row[2]), repr(row[3]), repr(row[4])])


def residual_sd(trajectories: Sequence[BidderTrajectory], mean, grid) -> float:
    r = np.concatenate([bt.trajectory.values - grid.interp(mean, bt.trajectory.times) for bt in trajectories])
    return float(np.std(r, ddof=1)) if r.size > 1 else 0.0


def remove_outliers(trajectories: Sequence[BidderTrajectory], mean, grid, sd: float | None = None,
                    n_sd: float = 3.0):
    """Drop every trajectory holding a bid farther than ``n_sd`` sd from the mean curve.

    Returns ``(kept, report)``. The comparison is strict, so a residual of
    exactly ``n_sd * sd`` is kept.
    """
    if sd is None:
        sd = residual_sd(trajectories, mean, grid)
    limit = n_sd * sd
    kept, removed, bids = [], [], []
    for bt in trajectories:
        tr = bt.trajectory
        res = tr.values - grid.interp(mean, tr.times)
        out = np.abs(res) > limit
        if out.any():
            removed.append(bt)
            bids.extend((bt.auction_id, bt.bidder_id, float(t), float(y), float(r))
                        for t, y, r in zip(tr.times[out], tr.values[out], res[out]))
        else:
            kept.append(bt)
    return kept, OutlierReport(removed, bids, float(sd), float(limit))


@dataclass(frozen=True)
class AuctionOutcome:
    auction_id: str
    winner: str  # bidder id
    price: float
    single_bid: bool = False


def determine_winners(trajectories: Sequence[BidderTrajectory], increment: float = 0.0) -> dict:
    """Winner and price per auction under the second-price rule.

    The highest bid wins, the earlier bid on ties. The price is the
    second-highest bid in the auction plus ``increment``; an auction with a
    single bid charges that bid and is flagged.
    """
    by_auction: dict[str, list] = defaultdict(list)
    for bt in trajectories:
        for t, y in zip(bt.trajectory.times, bt.trajectory.values):
            by_auction[bt.auction_id].append((float(y), float(t), bt.bidder_id))
    outcomes = {}
    for auction in sorted(by_auction):
        bids = sorted(by_auction[auction], key=lambda b: (-b[0], b[1], b[2]))
        top = bids[0]
        if len(bids) == 1:
            outcomes[auction] = AuctionOutcome(auction, top[2], top[0], True)
        else:
            outcomes[auction] = AuctionOutcome(auction, top[2], bids[1][0] + increment)
    return outcomes


def quartiles(values) -> tuple[float, float, float]:
    """(Q1, median, Q3) by linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return (math.nan, math.nan, math.nan)
    q = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return (float(q[0]), float(q[1]), float(q[2]))


def _mean_sd(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else math.nan


@dataclass
class ClusterSummary:
    cluster_id: str
    count: int
    mean_bids: float
    sd_bids: float
    time_quartiles: tuple
    amount_quartiles: tuple
    winners: int
    win_rate: float
    mean_price: float
    sd_price: float
    n_bids: int = 0
    extra: dict = field(default_factory=dict)


SUMMARY_COLUMNS = [
    "group", "n_trajectories", "mean_bids", "sd_bids",
    "time_q1", "time_median", "time_q3",
    "amount_q1", "amount_median", "amount_q3",
    "n_winners", "win_rate", "mean_paid", "sd_paid",
]


def _summarize(name, members, outcomes):
    counts = [len(bt.trajectory) for bt in members]
    times = np.concatenate([bt.trajectory.times for bt in members]) if members else np.zeros(0)
    amounts = np.concatenate([bt.trajectory.values for bt in members]) if members else np.zeros(0)
    prices = []
    for bt in members:
        o = outcomes.get(bt.auction_id)
        if o is not None and o.winner == bt.bidder_id:
            prices.append(o.price)
    mb, sb = _mean_sd(counts)
    mp, sp = _mean_sd(prices)
    return ClusterSummary(
        cluster_id=str(name),
        count=len(members),
        mean_bids=mb,
        sd_bids=sb,
        time_quartiles=quartiles(times),
        amount_quartiles=quartiles(amounts),
        winners=len(prices),
        win_rate=len(prices) / len(members) if members else 0.0,
        mean_price=mp,
        sd_price=sp,
        n_bids=int(sum(counts)),
    )


def cluster_summary(trajectories: Sequence[BidderTrajectory], labels, outcomes: dict | None = None,
                    include_overall: bool = True) -> list[ClusterSummary]:
    """Per-cluster summary rows, plus an ``Overall`` row."""
    labels = list(labels)
    if len(labels) != len(trajectories):
        raise LabelMismatch(f"{len(labels)} labels for {len(trajectories)} trajectories")
    if outcomes is None:
        outcomes = determine_winners(trajectories)
    groups: dict = defaultdict(list)
    for bt, lab in zip(trajectories, labels):
        groups[lab].append(bt)
    rows = [_summarize(lab, groups[lab], outcomes) for lab in sorted(groups)]
    if include_overall:
        rows.append(_summarize("Overall", list(trajectories), outcomes))
    return rows


def _fmt(v):
    if isinstance(v, float) and math.isnan(v):
        return "NA"
    return repr(v) if isinstance(v, float) else str(v)


def write_summary_csv(rows: Sequence[ClusterSummary], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in (
                r.cluster_id, r.count, r.mean_bids, r.sd_bids, *r.time_quartiles,
                *r.amount_quartiles, r.winners, r.win_rate, r.mean_price, r.sd_price)])


def to_bidder_trajectories(trajectories: Sequence[SparseTrajectory]) -> list[BidderTrajectory]:
    """Wrap plain trajectories whose ids look like ``auction/bidder``."""
    out = []
    for tr in trajectories:
        auction, _, bidder = tr.id.partition("/")
        if not bidder:
            raise ValidationError(f"trajectory id {tr.id!r} is not of the form auction/bidder")
        out.append(BidderTrajectory((auction, bidder), tr))
    return out
