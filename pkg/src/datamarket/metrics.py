"""Market-level metrics over a transaction log.

Everything here is a pure function of its inputs; a report built twice from
the same log serializes to the same bytes.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .domain import BuyerActionKind, SellerActionKind, Transaction
from .powerlaw import PowerLawFit, PowerLawFitError, fit_power_law

log = logging.getLogger(__name__)

OTHER_FIELD = "other"
ROLE_ACTIONS = {
    "seller": tuple(k.value for k in SellerActionKind),
    "buyer": tuple(k.value for k in BuyerActionKind),
}
METRIC_BLOCKS = (
    "purchases_per_dataset",
    "purchases_per_buyer",
    "repeat_purchases",
    "degree",
    "autocorrelation",
)


class EmptyLogError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    pass


def _require(transactions: Sequence[Transaction]) -> None:
    if not transactions:
        raise EmptyLogError("transaction log is empty")


def purchases_per_dataset(transactions: Sequence[Transaction]) -> dict[str, int]:
    _require(transactions)
    return dict(sorted(Counter(t.dataset_id for t in transactions).items()))


def purchases_per_buyer(transactions: Sequence[Transaction]) -> dict[str, int]:
    _require(transactions)
    return dict(sorted(Counter(t.buyer_id for t in transactions).items()))


def histogram(counts: Iterable[int]) -> dict[int, int]:
    """Number of items per count value, keys ascending."""
    return dict(sorted(Counter(counts).items()))


@dataclass(frozen=True)
class Summary:
    n: int
    total: int
    min: int
    max: int
    mean: float
    median: float
    mode: int

    @classmethod
    def of(cls, values: Sequence[int]) -> "Summary":
        hist = histogram(values)
        top = max(hist.values())
        mode = min(v for v, c in hist.items() if c == top)
        return cls(
            n=len(values),
            total=int(sum(values)),
            min=int(min(values)),
            max=int(max(values)),
            mean=sum(values) / len(values),
            median=float(statistics.median(values)),
            mode=int(mode),
        )


def repeat_purchases(transactions: Sequence[Transaction]) -> dict[int, int]:
    """Pair count per multiplicity, over (buyer, dataset) pairs across versions."""
    _require(transactions)
    pairs = Counter((t.buyer_id, t.dataset_id) for t in transactions)
    return histogram(pairs.values())


@dataclass(frozen=True)
class DegreeStats:
    degrees: dict[str, int]
    average_degree: float
    n_buyer_nodes: int
    n_seller_nodes: int
    max_degree: int
    max_degree_node: str


def degree_stats(transactions: Sequence[Transaction]) -> DegreeStats:
    """Degrees in the buyer-seller multigraph: one edge per transaction.

    Node keys are prefixed ``buyer:`` / ``seller:`` so the two sides never
    collide, even when ids are shared (ingested logs).
    """
    _require(transactions)
    deg: Counter[str] = Counter()
    for t in transactions:
        deg["buyer:" + t.buyer_id] += 1
        deg["seller:" + t.seller_id] += 1
    degrees = dict(sorted(deg.items()))
    top = max(degrees.values())
    top_node = min(k for k, v in degrees.items() if v == top)
    return DegreeStats(
        degrees=degrees,
        average_degree=2 * len(transactions) / len(degrees),
        n_buyer_nodes=sum(1 for k in degrees if k.startswith("buyer:")),
        n_seller_nodes=sum(1 for k in degrees if k.startswith("seller:")),
        max_degree=top,
        max_degree_node=top_node,
    )


def autocorr_lag1(series: Sequence[float]) -> float:
    """Lag-1 sample autocorrelation with the global mean in both factors."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 3:
        raise UndefinedMetricError("series needs at least 3 points")
    if np.all(x == x[0]):
        raise UndefinedMetricError("series is constant")
    return float(kernels.acf_lag1(x))


def step_volumes(transactions: Sequence[Transaction], n_steps: int | None = None) -> list[int]:
    if n_steps is None:
        n_steps = max((t.step for t in transactions), default=-1) + 1
    vol = [0] * n_steps
    for t in transactions:
        vol[t.step] += 1
    return vol


def trend_matrix(
    transactions: Sequence[Transaction],
    dataset_fields: Mapping[str, str],
    fields: Sequence[str],
    n_steps: int | None = None,
    weighted: bool = True,
) -> tuple[list[str], np.ndarray]:
    """Per-step field shares of transactions.

    With ``weighted`` each step's shares are scaled by that step's volume
    relative to the busiest step, i.e. ``count / max_volume``; otherwise the
    raw share ``count / volume``.  Transactions whose dataset has no known
    field fall into an extra ``other`` row.
    """
    totals = step_volumes(transactions, n_steps)
    rows = list(fields)
    index = {f: i for i, f in enumerate(rows)}
    counts = defaultdict(lambda: [0] * len(totals))
    unknown = 0
    for t in transactions:
        f = dataset_fields.get(t.dataset_id)
        if f not in index:
            unknown += 1
            f = OTHER_FIELD
        counts[f][t.step] += 1
    if unknown:
        log.warning("%d transactions have no known field; counted under %r", unknown, OTHER_FIELD)
        rows.append(OTHER_FIELD)
    peak = max(totals, default=0)
    mat = np.zeros((len(rows), len(totals)))
    for r, f in enumerate(rows):
        for s, c in enumerate(counts.get(f, [0] * len(totals))):
            if totals[s] == 0:
                continue
            mat[r, s] = c / peak if weighted else c / totals[s]
    return rows, mat


def action_ratio_series(
    events: Iterable[Mapping[str, Any]], n_steps: int | None = None, window: int = 3
) -> dict[str, dict[str, list[float | None]]]:
    """Smoothed per-step share of each action, per role.

    Shares are computed per step from ``action`` events, then averaged over a
    centered window (edges use whatever steps exist).  A step in which a role
    took no action is a gap (``None``) and is left out of its neighbours'
    averages.
    """
    per_step: dict[str, dict[int, Counter]] = {r: defaultdict(Counter) for r in ROLE_ACTIONS}
    last_step = -1
    for ev in events:
        if ev.get("type") != "action":
            continue
        role = ev["role"]
        per_step[role][int(ev["step"])][ev["action"]] += 1
        last_step = max(last_step, int(ev["step"]))
    if n_steps is None:
        n_steps = last_step + 1
    half = window // 2
    out: dict[str, dict[str, list[float | None]]] = {}
    for role, actions in ROLE_ACTIONS.items():
        raw: list[dict[str, float] | None] = []
        for s in range(n_steps):
            c = per_step[role].get(s)
            total = sum(c.values()) if c else 0
            raw.append({a: c[a] / total for a in actions} if total else None)
        series: dict[str, list[float | None]] = {a: [] for a in actions}
        for s in range(n_steps):
            if raw[s] is None:
                for a in actions:
                    series[a].append(None)
                continue
            near = [raw[j] for j in range(max(0, s - half), min(n_steps, s + half + 1))]
            near = [r for r in near if r is not None]
            for a in actions:
                series[a].append(sum(r[a] for r in near) / len(near))
        out[role] = series
    return out


def _fit_block(samples: Sequence[int]) -> tuple[PowerLawFit | None, str | None]:
    try:
        return fit_power_law(samples), None
    except PowerLawFitError as exc:
        return None, str(exc)


@dataclass
class MetricsReport:
    n_transactions: int
    n_steps: int
    purchases_per_dataset: dict[str, int]
    dataset_fit: PowerLawFit | None
    dataset_fit_error: str | None
    purchases_per_buyer: dict[str, int]
    buyer_fit: PowerLawFit | None
    buyer_fit_error: str | None
    repeat_purchase_counts: dict[int, int]
    degree: DegreeStats
    degree_fit: PowerLawFit | None
    degree_fit_error: str | None
    volumes: list[int]
    autocorr_lag1: float | None
    autocorr_error: str | None
    trend_fields: list[str]
    trend_matrix: np.ndarray
    trend_weighted: bool
    action_ratio_series: dict[str, dict[str, list[float | None]]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        def fit(f, err):
            return {"power_law": f.to_dict() if f else None, "power_law_error": err}

        def dist(counts, f, err):
            values = list(counts.values())
            s = Summary.of(values)
            return {
                "counts": counts,
                "histogram": {str(k): v for k, v in histogram(values).items()},
                "summary": s.__dict__,
                **fit(f, err),
            }

        d = self.degree
        return {
            "n_transactions": self.n_transactions,
            "n_steps": self.n_steps,
            "purchases_per_dataset": dist(
                self.purchases_per_dataset, self.dataset_fit, self.dataset_fit_error
            ),
            "purchases_per_buyer": dist(
                self.purchases_per_buyer, self.buyer_fit, self.buyer_fit_error
            ),
            "repeat_purchases": {
                "histogram": {str(k): v for k, v in self.repeat_purchase_counts.items()},
                "pairs": sum(self.repeat_purchase_counts.values()),
            },
            "degree": {
                "average_degree": d.average_degree,
                "n_buyer_nodes": d.n_buyer_nodes,
                "n_seller_nodes": d.n_seller_nodes,
                "max_degree": d.max_degree,
                "max_degree_node": d.max_degree_node,
                "degrees": d.degrees,
                "histogram": {str(k): v for k, v in histogram(d.degrees.values()).items()},
                **fit(self.degree_fit, self.degree_fit_error),
            },
            "autocorrelation": {
                "lag1": self.autocorr_lag1,
                "error": self.autocorr_error,
                "volumes": self.volumes,
            },
            "trend_matrix": {
                "fields": self.trend_fields,
                "weighted": self.trend_weighted,
                "matrix": self.trend_matrix.tolist(),
            },
            "action_ratios": {"window": 3, "series": self.action_ratio_series},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def build_report(
    transactions: Sequence[Transaction],
    n_steps: int | None = None,
    dataset_fields: Mapping[str, str] | None = None,
    fields: Sequence[str] = (),
    events: Iterable[Mapping[str, Any]] | None = None,
    weighted_trend: bool = True,
) -> MetricsReport:
    _require(transactions)
    if n_steps is None:
        n_steps = max(t.step for t in transactions) + 1
    per_dataset = purchases_per_dataset(transactions)
    per_buyer = purchases_per_buyer(transactions)
    deg = degree_stats(transactions)
    vols = step_volumes(transactions, n_steps)
    try:
        r1, r1_err = autocorr_lag1(vols), None
    except UndefinedMetricError as exc:
        r1, r1_err = None, str(exc)
    rows, mat = trend_matrix(transactions, dataset_fields or {}, fields, n_steps, weighted_trend)
    dfit, dfit_err = _fit_block(list(per_dataset.values()))
    bfit, bfit_err = _fit_block(list(per_buyer.values()))
    gfit, gfit_err = _fit_block(list(deg.degrees.values()))
    return MetricsReport(
        n_transactions=len(transactions),
        n_steps=n_steps,
        purchases_per_dataset=per_dataset,
        dataset_fit=dfit,
        dataset_fit_error=dfit_err,
        purchases_per_buyer=per_buyer,
        buyer_fit=bfit,
        buyer_fit_error=bfit_err,
        repeat_purchase_counts=repeat_purchases(transactions),
        degree=deg,
        degree_fit=gfit,
        degree_fit_error=gfit_err,
        volumes=vols,
        autocorr_lag1=r1,
        autocorr_error=r1_err,
        trend_fields=rows,
        trend_matrix=mat,
        trend_weighted=weighted_trend,
        action_ratio_series=action_ratio_series(events or [], n_steps),
    )


# (row name, path into the report dict)
COMPARISON_ROWS = (
    ("purchases_per_dataset.alpha", ("purchases_per_dataset", "power_law", "alpha")),
    ("purchases_per_dataset.ks_distance", ("purchases_per_dataset", "power_law", "ks_distance")),
    ("purchases_per_dataset.x_min", ("purchases_per_dataset", "power_law", "x_min")),
    ("purchases_per_dataset.min", ("purchases_per_dataset", "summary", "min")),
    ("purchases_per_dataset.max", ("purchases_per_dataset", "summary", "max")),
    ("purchases_per_dataset.mean", ("purchases_per_dataset", "summary", "mean")),
    ("purchases_per_buyer.alpha", ("purchases_per_buyer", "power_law", "alpha")),
    ("purchases_per_buyer.ks_distance", ("purchases_per_buyer", "power_law", "ks_distance")),
    ("purchases_per_buyer.min", ("purchases_per_buyer", "summary", "min")),
    ("purchases_per_buyer.max", ("purchases_per_buyer", "summary", "max")),
    ("purchases_per_buyer.mean", ("purchases_per_buyer", "summary", "mean")),
    ("purchases_per_buyer.mode", ("purchases_per_buyer", "summary", "mode")),
    ("repeat_purchases.pairs", ("repeat_purchases", "pairs")),
    ("repeat_purchases.single", ("repeat_purchases", "histogram", "1")),
    ("degree.average_degree", ("degree", "average_degree")),
    ("degree.max_degree", ("degree", "max_degree")),
    ("degree.alpha", ("degree", "power_law", "alpha")),
    ("degree.ks_distance", ("degree", "power_law", "ks_distance")),
    ("autocorrelation.lag1", ("autocorrelation", "lag1")),
)


class SchemaMismatchError(ValueError):
    pass


def _dig(d: Any, path: Sequence[str]) -> Any:
    for key in path:
        if not isinstance(d, Mapping) or key not in d:
            return None
        d = d[key]
    return d


def compare(report_a, report_b) -> list[dict[str, Any]]:
    """Side-by-side values with ``delta = a - b`` and ``rel_delta = delta / |b|``."""
    a = report_a.to_dict() if isinstance(report_a, MetricsReport) else report_a
    b = report_b.to_dict() if isinstance(report_b, MetricsReport) else report_b
    for name, rep in (("a", a), ("b", b)):
        missing = [blk for blk in METRIC_BLOCKS if blk not in rep]
        if missing:
            raise SchemaMismatchError(f"report {name} lacks blocks: {', '.join(missing)}")
    rows = []
    for name, path in COMPARISON_ROWS:
        va, vb = _dig(a, path), _dig(b, path)
        if isinstance(va, (int, float)) and isinstance(vb, (int, float)):
            delta = va - vb
            rel = delta / abs(vb) if vb != 0 else (0.0 if delta == 0 else None)
        else:
            delta = rel = None
        rows.append({"metric": name, "a": va, "b": vb, "delta": delta, "rel_delta": rel})
    return rows


def figure_tables(report: MetricsReport) -> dict[str, list[list[Any]]]:
    """Plot-ready tables keyed by file stem; first row is the header."""
    tables: dict[str, list[list[Any]]] = {}
    tables["hist_purchases_per_dataset"] = [["purchases", "datasets"]] + [
        [k, v] for k, v in histogram(report.purchases_per_dataset.values()).items()
    ]
    tables["hist_purchases_per_buyer"] = [["purchases", "buyers"]] + [
        [k, v] for k, v in histogram(report.purchases_per_buyer.values()).items()
    ]
    tables["hist_repeat_purchases"] = [["multiplicity", "pairs"]] + [
        [k, v] for k, v in report.repeat_purchase_counts.items()
    ]
    tables["transactions_per_step"] = [["step", "transactions"]] + [
        [s, v] for s, v in enumerate(report.volumes)
    ]
    degs = sorted(report.degree.degrees.values())
    n = len(degs)
    ccdf = [["degree", "nodes", "ccdf"]]
    for k, v in histogram(degs).items():
        ccdf.append([k, v, sum(1 for d in degs if d >= k) / n])
    tables["degree_distribution"] = ccdf
    tables["trend_matrix"] = [["field"] + list(range(report.n_steps))] + [
        [f] + row for f, row in zip(report.trend_fields, report.trend_matrix.tolist())
    ]
    for role, series in report.action_ratio_series.items():
        actions = list(series)
        rows = [["step"] + actions]
        for s in range(report.n_steps):
            rows.append([s] + ["" if series[a][s] is None else series[a][s] for a in actions])
        tables[f"action_ratio_{role}"] = rows
    return tables
