"""Aggregate scored predictions into comparison tables with bootstrap intervals."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from typing import Any, Iterable, Literal, Mapping, Optional, Sequence

import numpy as np

from .errors import EmptySample, JoinMismatch
from .metrics import MetricVector

METRICS = ("teds", "lev_ted", "grits_top", "grits_con")
LOWER_IS_BETTER = frozenset({"lev_ted"})
METRIC_TITLES = {
    "teds": "TEDS",
    "lev_ted": "Lev-TED",
    "grits_top": "GriTS-Top",
    "grits_con": "GriTS-Con",
}

ReportFormat = Literal["table-text", "csv", "json"]


@dataclass(frozen=True)
class ScoredRecord:
    task_id: str
    metrics: Optional[MetricVector]
    mode: str = ""
    # Lev-TED of an empty table against the truth; charged to invalid outputs when penalizing
    null_lev_ted: Optional[float] = None

    @property
    def valid(self) -> bool:
        return self.metrics is not None

    def value(self, metric: str) -> float:
        m = self.metrics
        if metric == "teds":
            return m.teds
        if metric == "lev_ted":
            return float(m.lev_ted)
        if metric == "grits_top":
            return m.grits_top_mean
        if metric == "grits_con":
            return m.grits_con_mean
        raise KeyError(metric)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "mode": self.mode,
            "valid": self.valid,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "null_lev_ted": self.null_lev_ted,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScoredRecord":
        m = d.get("metrics")
        return cls(
            str(d["task_id"]),
            MetricVector.from_dict(m) if m else None,
            d.get("mode", ""),
            d.get("null_lev_ted"),
        )


@dataclass(frozen=True)
class Aggregate:
    metric_name: str
    mean: float
    n_valid: int
    n_total: int
    exact_match_count: int
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "mean": _finite_or_none(self.mean),
            "n_valid": self.n_valid,
            "n_total": self.n_total,
            "exact_match_count": self.exact_match_count,
            "ci_low": _finite_or_none(self.ci_low),
            "ci_high": _finite_or_none(self.ci_high),
        }


def _finite_or_none(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


def bootstrap_ci(
    values: Sequence[float],
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean.

    The interval is widened, if needed, to contain the sample mean.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptySample("cannot bootstrap an empty sample")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if np.all(x == x[0]):
        return float(x[0]), float(x[0])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    means = x[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(means, [alpha, 1.0 - alpha])
    mean = float(x.mean())
    return min(float(low), mean), max(float(high), mean)


def aggregate(
    records: Iterable[ScoredRecord],
    *,
    penalize_invalid: bool = False,
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> dict[str, Aggregate]:
    """Per-metric means with bootstrap intervals.

    By default only well-formed predictions enter the means, and ``n_valid``
    / ``n_total`` expose the denominator.  With ``penalize_invalid`` an
    invalid prediction scores 0 on the similarities and the empty-table
    Lev-TED on ``lev_ted``.  Records are taken in task-id order, so the result
    does not depend on input order.
    """
    records = sorted(records, key=lambda r: r.task_id)
    if not records:
        raise EmptySample("no scored predictions")
    valid = [r for r in records if r.valid]
    em = sum(1 for r in valid if r.metrics.exact_match)
    out = {}
    for metric in METRICS:
        if penalize_invalid:
            values = [r.value(metric) if r.valid else _penalty(r, metric) for r in records]
        else:
            values = [r.value(metric) for r in valid]
        if values:
            mean = float(np.mean(values))
            low, high = bootstrap_ci(values, resamples, level, seed)
        else:
            mean = low = high = float("nan")
        out[metric] = Aggregate(metric, mean, len(valid), len(records), em, low, high)
    return out


def _penalty(rec: ScoredRecord, metric: str) -> float:
    if metric == "lev_ted":
        if rec.null_lev_ted is None:
            raise ValueError(f"task {rec.task_id}: no empty-table Lev-TED to charge")
        return float(rec.null_lev_ted)
    return 0.0


def improvement_vs_baseline(
    method: Iterable[ScoredRecord],
    baseline: Iterable[ScoredRecord],
) -> dict[str, dict[str, float]]:
    """How often, and by how much, ``method`` beats ``baseline`` per task.

    Records are joined on task id; ids present on one side only trigger a
    :class:`JoinMismatch` warning.  Tasks invalid on either side are left out.
    ``mean_absolute_improvement`` is signed so that positive means better
    (Lev-TED differences are negated).
    """
    m = {r.task_id: r for r in method}
    b = {r.task_id: r for r in baseline}
    orphans = sorted(set(m) ^ set(b))
    if orphans:
        warnings.warn(JoinMismatch(orphans), stacklevel=2)
    joined = [(m[k], b[k]) for k in sorted(set(m) & set(b)) if m[k].valid and b[k].valid]
    out = {}
    for metric in METRICS:
        sign = -1.0 if metric in LOWER_IS_BETTER else 1.0
        deltas = [sign * (x.value(metric) - y.value(metric)) for x, y in joined]
        if deltas:
            ratio = sum(d > 0 for d in deltas) / len(deltas)
            mean = float(np.mean(deltas))
        else:
            ratio = mean = float("nan")
        out[metric] = {
            "ratio_improved": ratio,
            "mean_absolute_improvement": mean,
            "n_joined": len(deltas),
        }
    return out


@dataclass
class ReportRow:
    name: str
    aggregates: Mapping[str, Aggregate]
    improvement: Optional[Mapping[str, Mapping[str, float]]] = None

    @property
    def n_total(self) -> int:
        return next(iter(self.aggregates.values())).n_total

    @property
    def n_valid(self) -> int:
        return next(iter(self.aggregates.values())).n_valid

    @property
    def exact_match_count(self) -> int:
        return next(iter(self.aggregates.values())).exact_match_count

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "name": self.name,
            "n_total": self.n_total,
            "n_valid": self.n_valid,
            "exact_match_count": self.exact_match_count,
            "metrics": {
                k: {
                    "mean": _finite_or_none(a.mean),
                    "ci_low": _finite_or_none(a.ci_low),
                    "ci_high": _finite_or_none(a.ci_high),
                }
                for k, a in self.aggregates.items()
            },
        }
        if self.improvement is not None:
            d["improvement"] = {
                k: {
                    "ratio_improved": _finite_or_none(v["ratio_improved"]),
                    "mean_absolute_improvement": _finite_or_none(v["mean_absolute_improvement"]),
                    "n_joined": int(v["n_joined"]),
                }
                for k, v in self.improvement.items()
            }
        return d


_NUM_OR_NULL = {"type": ["number", "null"]}
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["rows"],
    "properties": {
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "n_total", "n_valid", "exact_match_count", "metrics"],
                "properties": {
                    "name": {"type": "string"},
                    "n_total": {"type": "integer", "minimum": 0},
                    "n_valid": {"type": "integer", "minimum": 0},
                    "exact_match_count": {"type": "integer", "minimum": 0},
                    "metrics": {
                        "type": "object",
                        "additionalProperties": {
                            "type": "object",
                            "required": ["mean", "ci_low", "ci_high"],
                            "properties": {
                                "mean": _NUM_OR_NULL,
                                "ci_low": _NUM_OR_NULL,
                                "ci_high": _NUM_OR_NULL,
                            },
                        },
                    },
                    "improvement": {
                        "type": "object",
                        "additionalProperties": {
                            "type": "object",
                            "required": ["ratio_improved", "mean_absolute_improvement", "n_joined"],
                            "properties": {
                                "ratio_improved": _NUM_OR_NULL,
                                "mean_absolute_improvement": _NUM_OR_NULL,
                                "n_joined": {"type": "integer", "minimum": 0},
                            },
                        },
                    },
                },
            },
        }
    },
}


def _fmt(x: float, digits: int = 3) -> str:
    return "-" if not math.isfinite(x) else f"{x:.{digits}f}"


def _csv_num(x: float) -> str:
    return "" if not math.isfinite(x) else repr(float(x))


def render_report(rows: Sequence[ReportRow], fmt: ReportFormat = "table-text") -> str:
    """Rows are methods (model / mode), columns are metrics."""
    if fmt == "json":
        return json.dumps({"rows": [r.to_dict() for r in rows]}, indent=2, sort_keys=True) + "\n"
    has_imp = any(r.improvement is not None for r in rows)
    if fmt == "csv":
        buf = io.StringIO()
        header = ["name", "n_total", "n_valid", "exact_match_count"]
        for m in METRICS:
            header += [f"{m}_mean", f"{m}_ci_low", f"{m}_ci_high"]
        if has_imp:
            for m in METRICS:
                header += [f"{m}_ratio_improved", f"{m}_mean_absolute_improvement"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            line = [r.name, r.n_total, r.n_valid, r.exact_match_count]
            for m in METRICS:
                a = r.aggregates[m]
                line += [_csv_num(a.mean), _csv_num(a.ci_low), _csv_num(a.ci_high)]
            if has_imp:
                for m in METRICS:
                    imp = (r.improvement or {}).get(m)
                    line += (
                        [_csv_num(imp["ratio_improved"]), _csv_num(imp["mean_absolute_improvement"])]
                        if imp
                        else ["", ""]
                    )
            w.writerow(line)
        return buf.getvalue()
    if fmt != "table-text":
        raise ValueError(f"unknown report format {fmt!r}")

    header = ["Method", *(METRIC_TITLES[m] for m in METRICS), "Exact Match / Valid Tables"]
    if has_imp:
        header += [f"{METRIC_TITLES[m]} improved" for m in METRICS]
    body = []
    for r in rows:
        cells = [r.name]
        for m in METRICS:
            a = r.aggregates[m]
            digits = 2 if m in LOWER_IS_BETTER else 3
            cells.append(f"{_fmt(a.mean, digits)} [{_fmt(a.ci_low, digits)}, {_fmt(a.ci_high, digits)}]")
        cells.append(f"{r.exact_match_count}/{r.n_valid} (of {r.n_total})")
        if has_imp:
            for m in METRICS:
                imp = (r.improvement or {}).get(m)
                cells.append(
                    f"{_fmt(100 * imp['ratio_improved'], 1)}% / {_fmt(imp['mean_absolute_improvement'])}"
                    if imp
                    else "-"
                )
        body.append(cells)
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = [
        " | ".join(c.ljust(w) for c, w in zip(header, widths)).rstrip(),
        "-+-".join("-" * w for w in widths),
    ]
    lines += [" | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in body]
    return "\n".join(lines) + "\n"
