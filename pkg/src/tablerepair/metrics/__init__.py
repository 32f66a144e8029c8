"""Table similarity metrics: TEDS, Lev-TED, GriTS and exact match."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal, Optional

from ..errors import TableError, TruthUnparseable
from ..table_model import TableTree, canonical_html, check_validity, parse_table, to_grid
from .grits import grits, grits_con, grits_from_matrix, grits_top, sim_con, sim_top
from .strings import lcs_length, lcs_similarity, levenshtein
from .ted import LEVENSHTEIN, UNIT, CostModel, ted

__all__ = [
    "CostModel",
    "UNIT",
    "LEVENSHTEIN",
    "MetricVector",
    "ted",
    "teds",
    "lev_ted",
    "grits",
    "grits_top",
    "grits_con",
    "grits_from_matrix",
    "sim_top",
    "sim_con",
    "exact_match",
    "score",
    "levenshtein",
    "lcs_length",
    "lcs_similarity",
]

TedsNorm = Literal["sum", "max"]


def teds(a: TableTree, b: TableTree, normalization: TedsNorm = "sum") -> float:
    """``1 - TED / (|a| + |b|)`` under unit costs.

    ``normalization="max"`` divides by ``max(|a|, |b|)`` instead (the variant
    common in table-recognition benchmarks), clamped at 0.
    """
    dist = ted(a, b, UNIT)
    if normalization == "sum":
        return 1.0 - dist / (a.size + b.size)
    if normalization == "max":
        return max(0.0, 1.0 - dist / max(a.size, b.size))
    raise ValueError(f"unknown TEDS normalization {normalization!r}")


def lev_ted(a: TableTree, b: TableTree) -> int:
    """Unnormalized tree edit distance with Levenshtein label costs."""
    return ted(a, b, LEVENSHTEIN)


def exact_match(a_html: str, b_html: str) -> bool:
    try:
        a = canonical_html(parse_table(a_html))
        b = canonical_html(parse_table(b_html))
    except TableError:
        return False
    return a == b


@dataclass(frozen=True)
class MetricVector:
    teds: float
    lev_ted: float
    grits_top_lower: float
    grits_top_upper: float
    grits_con_lower: float
    grits_con_upper: float
    exact_match: bool

    @property
    def grits_top_mean(self) -> float:
        return (self.grits_top_lower + self.grits_top_upper) / 2

    @property
    def grits_con_mean(self) -> float:
        return (self.grits_con_lower + self.grits_con_upper) / 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grits_top_mean"] = self.grits_top_mean
        d["grits_con_mean"] = self.grits_con_mean
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricVector":
        return cls(
            d["teds"],
            d["lev_ted"],
            d["grits_top_lower"],
            d["grits_top_upper"],
            d["grits_con_lower"],
            d["grits_con_upper"],
            d["exact_match"],
        )


def _parse_truth(truth_html: str) -> TableTree:
    try:
        tree = parse_table(truth_html, collapse_whitespace=True)
        to_grid(tree)
    except TableError as exc:
        raise TruthUnparseable(f"ground truth does not parse: {exc}") from exc
    return tree


def score(
    prediction_html: str,
    truth_html: str,
    teds_normalization: TedsNorm = "sum",
) -> Optional[MetricVector]:
    """All metrics for one prediction, or None when it is not a well-formed table.

    Cell text is whitespace-normalized on both sides before comparing.
    """
    truth = _parse_truth(truth_html)
    if not check_validity(prediction_html).well_formed:
        return None
    pred = parse_table(prediction_html, collapse_whitespace=True)
    g_pred, g_truth = to_grid(pred), to_grid(truth)
    top = grits_top(g_pred, g_truth)
    con = grits_con(g_pred, g_truth)
    return MetricVector(
        teds=teds(pred, truth, teds_normalization),
        lev_ted=lev_ted(pred, truth),
        grits_top_lower=top[0],
        grits_top_upper=top[1],
        grits_con_lower=con[0],
        grits_con_upper=con[1],
        exact_match=canonical_html(pred) == canonical_html(truth),
    )


def null_lev_ted(truth_html: str) -> int:
    """Lev-TED from an empty ``<table>`` to the truth (cost of building it from scratch)."""
    return lev_ted(TableTree.from_nested("table"), _parse_truth(truth_html))
