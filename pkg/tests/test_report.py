from __future__ import annotations

import csv
import io
import json
import math
import random
import warnings

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tablerepair.errors import EmptySample, JoinMismatch
from tablerepair.metrics import MetricVector
from tablerepair.report import (
    METRICS,
    REPORT_SCHEMA,
    ReportRow,
    ScoredRecord,
    aggregate,
    bootstrap_ci,
    improvement_vs_baseline,
    render_report,
)


def vec(teds=1.0, lev=0.0, top=(1.0, 1.0), con=(1.0, 1.0), em=True):
    return MetricVector(teds, lev, top[0], top[1], con[0], con[1], em)


def rec(task_id, metrics=None, null=10.0):
    return ScoredRecord(task_id, metrics, "lift", null)


def sample_records(n=20, seed=0, invalid_every=5):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        if invalid_every and i % invalid_every == 4:
            out.append(rec(f"t{i:03d}", None, float(rng.randint(5, 30))))
            continue
        t = rng.random()
        out.append(rec(f"t{i:03d}", vec(t, rng.randint(0, 20), (t, min(1, t + 0.1)), (t * 0.9, t), t > 0.9)))
    return out


# -- bootstrap ---------------------------------------------------------------


def test_bootstrap_constant_input_zero_width():
    assert bootstrap_ci([0.5] * 40) == (0.5, 0.5)


def test_bootstrap_empty_and_bad_level():
    with pytest.raises(EmptySample):
        bootstrap_ci([])
    with pytest.raises(ValueError):
        bootstrap_ci([1.0, 2.0], level=1.0)


def test_bootstrap_deterministic_and_contains_mean():
    x = [0.1, 0.5, 0.9, 0.2, 0.3]
    lo, hi = bootstrap_ci(x, seed=5)
    assert (lo, hi) == bootstrap_ci(x, seed=5)
    assert lo <= np.mean(x) <= hi


def test_bootstrap_matches_direct_percentiles():
    # independent route: resample with the same generator and take percentiles by hand
    x = np.array([0.3, 0.9, 0.1, 0.7, 0.5, 0.8, 0.2])
    rng = np.random.default_rng(11)
    means = np.sort([x[rng.integers(0, 7, 7)].mean() for _ in range(2000)])
    lo, hi = bootstrap_ci(x, resamples=2000, seed=11)
    assert lo == pytest.approx(np.percentile(means, 2.5))
    assert hi == pytest.approx(np.percentile(means, 97.5))


def test_bootstrap_width_shrinks_with_n():
    rng = np.random.default_rng(0)
    small = [np.subtract(*bootstrap_ci(rng.normal(size=20), 500, seed=s)[::-1]) for s in range(30)]
    large = [np.subtract(*bootstrap_ci(rng.normal(size=200), 500, seed=s)[::-1]) for s in range(30)]
    assert np.mean(large) < np.mean(small)


def test_bootstrap_coverage_quick():
    rng = np.random.default_rng(1)
    hits = 0
    trials = 400
    for k in range(trials):
        lo, hi = bootstrap_ci(rng.normal(0.6, 0.2, size=60), resamples=400, seed=k)
        hits += lo <= 0.6 <= hi
    assert 0.89 <= hits / trials <= 0.99


# -- aggregate ---------------------------------------------------------------


def test_aggregate_all_valid_perfect():
    agg = aggregate([rec(f"t{i}", vec()) for i in range(5)])
    a = agg["teds"]
    assert a.mean == 1.0 and a.n_valid == a.n_total == 5 and a.exact_match_count == 5
    assert (a.ci_low, a.ci_high) == (1.0, 1.0)


def test_aggregate_invalid_excluded_from_denominator():
    agg = aggregate([rec("a", vec(teds=0.5)), rec("b", None), rec("c", vec(teds=1.0))])
    assert agg["teds"].mean == 0.75 and agg["teds"].n_valid == 2 and agg["teds"].n_total == 3


def test_aggregate_penalize_invalid():
    recs = [rec("a", vec(teds=0.5, lev=4)), rec("b", None, null=12), rec("c", vec(teds=1.0, lev=0))]
    agg = aggregate(recs, penalize_invalid=True)
    assert agg["teds"].mean == pytest.approx(0.5)
    assert agg["lev_ted"].mean == pytest.approx(16 / 3)
    with pytest.raises(ValueError):
        aggregate([ScoredRecord("x", None)], penalize_invalid=True)


def test_aggregate_uses_grits_means():
    agg = aggregate([rec("a", vec(top=(0.2, 0.6), con=(0.4, 0.5)))])
    assert agg["grits_top"].mean == pytest.approx(0.4)
    assert agg["grits_con"].mean == pytest.approx(0.45)


def test_aggregate_empty_and_all_invalid():
    with pytest.raises(EmptySample):
        aggregate([])
    agg = aggregate([rec("a", None)])
    assert math.isnan(agg["teds"].mean) and agg["teds"].n_valid == 0


@given(st.randoms(use_true_random=False))
@settings(max_examples=30, deadline=None)
def test_aggregate_permutation_invariant(r):
    recs = sample_records(15)
    shuffled = recs[:]
    r.shuffle(shuffled)
    assert aggregate(recs, resamples=200) == aggregate(shuffled, resamples=200)


def test_aggregate_bounds():
    for a in aggregate(sample_records(30)).values():
        assert a.n_valid <= a.n_total
        assert a.ci_low <= a.mean <= a.ci_high


# -- improvement -------------------------------------------------------------


def test_improvement_identical_is_zero():
    recs = sample_records(10)
    imp = improvement_vs_baseline(recs, recs)
    for m in METRICS:
        assert imp[m]["ratio_improved"] == 0 and imp[m]["mean_absolute_improvement"] == 0


def test_improvement_perfect_method():
    base = [rec(f"t{i}", vec(teds=0.5, lev=3, top=(0.5, 0.5), con=(0.4, 0.6), em=False)) for i in range(4)]
    method = [rec(f"t{i}", vec()) for i in range(4)]
    imp = improvement_vs_baseline(method, base)
    assert all(imp[m]["ratio_improved"] == 1.0 for m in METRICS)
    assert imp["lev_ted"]["mean_absolute_improvement"] == 3.0
    assert imp["teds"]["mean_absolute_improvement"] == 0.5


def test_improvement_skips_invalid_and_warns_on_orphans():
    base = [rec("a", vec(teds=0.5)), rec("b", vec(teds=0.5)), rec("c", vec(teds=0.5))]
    method = [rec("a", vec(teds=0.9)), rec("b", None), rec("d", vec())]
    with pytest.warns(JoinMismatch) as caught:
        imp = improvement_vs_baseline(method, base)
    assert caught[0].message.orphans == ["c", "d"]
    assert imp["teds"]["n_joined"] == 1 and imp["teds"]["ratio_improved"] == 1.0


def test_improvement_no_warning_when_aligned():
    recs = sample_records(6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        improvement_vs_baseline(recs, recs)


# -- rendering ---------------------------------------------------------------


def rows():
    base = sample_records(20, seed=1)
    return [
        ReportRow("baseline", aggregate(base, resamples=200), None),
        ReportRow(
            "lift",
            aggregate(sample_records(20, seed=2), resamples=200),
            improvement_vs_baseline(sample_records(20, seed=2), base),
        ),
    ]


def test_text_report_shape():
    text = render_report(rows()[:1])
    lines = text.splitlines()
    assert len(lines) == 3
    assert "TEDS" in lines[0] and "Exact Match / Valid Tables" in lines[0]
    assert lines[2].startswith("baseline")
    a = rows()[0]
    assert f"{a.exact_match_count}/{a.n_valid} (of {a.n_total})" in lines[2]


def test_text_report_with_improvement_columns():
    text = render_report(rows())
    assert "TEDS improved" in text.splitlines()[0]
    assert text.splitlines()[2].rstrip().endswith("-")


def test_csv_report_round_trip():
    rs = rows()
    parsed = list(csv.DictReader(io.StringIO(render_report(rs, "csv"))))
    assert [p["name"] for p in parsed] == ["baseline", "lift"]
    for p, r in zip(parsed, rs):
        assert int(p["n_valid"]) == r.n_valid
        for m in METRICS:
            assert float(p[f"{m}_mean"]) == r.aggregates[m].mean
    assert parsed[0]["teds_ratio_improved"] == ""


def test_json_report_validates_against_schema():
    doc = json.loads(render_report(rows(), "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["rows"][1]["improvement"]["teds"]["n_joined"] == 16


def test_json_report_nan_becomes_null():
    r = ReportRow("x", aggregate([rec("a", None)]))
    doc = json.loads(render_report([r], "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["rows"][0]["metrics"]["teds"]["mean"] is None


def test_render_deterministic():
    assert render_report(rows(), "json") == render_report(rows(), "json")


def test_unknown_format():
    with pytest.raises(ValueError):
        render_report(rows(), "xml")


def test_scored_record_round_trip():
    for r in sample_records(10):
        assert ScoredRecord.from_dict(json.loads(json.dumps(r.to_dict()))) == r
