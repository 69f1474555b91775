import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trkit.errors import SchemaError
from trkit.intervals import RangeSet, SampleScores
from trkit.metrics import (
    BUCKETS,
    CurvePoint,
    QueryRecord,
    auc,
    bucket,
    curve,
    evaluate,
    report,
    thresholds,
)


def q(qid, gt=((10, 20),), duration=100.0, fmt="keyword", modality="vision"):
    return QueryRecord(qid, "vid", "text", fmt, modality, duration, RangeSet.from_pairs(gt))


def iou_scores(values):
    return [SampleScores(v, v, v) for v in values]


def grid_sum_auc(values, grid_n):
    # independent route: accuracy by direct counting at every threshold, trapezoid by hand
    taus = np.linspace(0, 1, grid_n)
    acc = np.array([np.mean(np.asarray(values) >= t) for t in taus])
    return float(np.trapezoid(acc, taus))


def test_evaluate_examples():
    rec = q("a")
    [sq] = evaluate([rec], {"a": rec.gt})
    assert (sq.scores.precision, sq.scores.recall, sq.scores.iou) == (1, 1, 1)
    assert not sq.missing

    [sq] = evaluate([rec], {})
    assert (sq.scores.precision, sq.scores.recall, sq.scores.iou) == (0, 0, 0)
    assert sq.missing

    recs = [q("b"), q("a")]
    pred = RangeSet.from_pairs([(15, 25)])
    out = evaluate(recs, {"a": pred, "b": pred})
    assert [s.record.query_id for s in out] == ["a", "b"]
    assert all(s.scores.iou == 1 / 3 for s in out)


def test_evaluate_rejects_duplicates():
    with pytest.raises(SchemaError):
        evaluate([q("a"), q("a")], {})


def test_query_record_validation():
    with pytest.raises(SchemaError):
        q("x", gt=())
    with pytest.raises(SchemaError):
        q("x", gt=((10, 120),), duration=100)
    with pytest.raises(ValueError):
        q("x", fmt="paragraph")
    assert q("x", modality="vision+audio").modality.value == "vision_audio"


def test_curve_examples():
    pts = curve(iou_scores([1, 1, 1]), "IoU", 11)
    assert all(p.accuracy == 1 for p in pts)
    pts = curve(iou_scores([0.2, 0.4, 0.6, 0.8]), "IoU", 11)
    assert pts[5].threshold == 0.5 and pts[5].accuracy == 0.5
    pts = curve(iou_scores([0.0]), "IoU", 11)
    assert pts[0].accuracy == 1 and all(p.accuracy == 0 for p in pts[1:])


def test_curve_errors():
    with pytest.raises(ValueError):
        curve([], "IoU", 11)
    with pytest.raises(ValueError):
        curve(iou_scores([0.5]), "IoU", 1)
    with pytest.raises(ValueError):
        curve(iou_scores([0.5]), "F1", 11)


def test_auc_examples():
    assert auc([CurvePoint(t, 1.0) for t in thresholds(1001)]) == pytest.approx(1.0, abs=1e-12)
    vals = [0.2, 0.4, 0.6, 0.8]
    a = auc(curve(iou_scores(vals), "IoU", 1001))
    assert abs(a - 0.5) <= 1e-3
    assert a == pytest.approx(grid_sum_auc(vals, 1001), abs=1e-12)
    assert 0 <= auc(curve(iou_scores([0.0]), "IoU", 1001)) <= 1 / 1000


def test_auc_rejects_nonuniform_grid():
    with pytest.raises(ValueError):
        auc([CurvePoint(0, 1), CurvePoint(0.3, 1), CurvePoint(1, 1)])
    with pytest.raises(ValueError):
        auc([CurvePoint(1, 1), CurvePoint(0, 1)])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.sampled_from(["P", "R", "IoU"]))
def test_auc_mean_identity_and_monotone(values, metric):
    scores = [SampleScores(v, v, v) for v in values]
    pts = curve(scores, metric, 1001)
    assert all(a.accuracy >= b.accuracy for a, b in zip(pts, pts[1:]))
    assert abs(auc(pts) - sum(values) / len(values)) <= 1e-3


@pytest.mark.parametrize(
    "duration, name",
    [(3871, "ultra_long"), (45, "ultra_short"), (600, "medium"), (59.999, "ultra_short"),
     (60, "short"), (1800, "long"), (3600, "ultra_long"), (1799.9, "medium")],
)
def test_bucket(duration, name):
    assert bucket(duration).name == name


@pytest.mark.parametrize("bad", [0, -5])
def test_bucket_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        bucket(bad)


def test_buckets_partition():
    assert [b.upper_s for b in BUCKETS[:-1]] == [b.lower_s for b in BUCKETS[1:]] == [60, 600, 1800, 3600]
    assert BUCKETS[-1].upper_s == math.inf


def test_report_homogeneous_perfect():
    recs = [q(f"q{i}", duration=120) for i in range(5)]
    rep = report(evaluate(recs, {r.query_id: r.gt for r in recs}), 101)
    assert len(rep.rows) == 4
    for row in rep.rows:
        assert (row.p_auc, row.r_auc, row.iou_auc) == (1.0, 1.0, 1.0)
    assert rep.row("duration", "ultra_short") is None


def test_report_overall_is_pooled_not_mean_of_buckets():
    recs = [q("a", duration=30), q("b", duration=3000), q("c", duration=3000)]
    preds = {"a": recs[0].gt, "b": RangeSet.from_pairs([(15, 25)])}
    rep = report(evaluate(recs, preds), 1001)
    pooled = [1.0, 1 / 3, 0.0]
    assert rep.overall.iou_auc == pytest.approx(grid_sum_auc(pooled, 1001), abs=1e-12)
    bucket_mean = (rep.row("duration", "ultra_short").iou_auc + rep.row("duration", "long").iou_auc) / 2
    assert abs(rep.overall.iou_auc - bucket_mean) > 0.05
    assert rep.n_missing == 1


def test_report_table1_counts_and_permutation_invariance():
    counts = {"ultra_short": 183, "short": 439, "medium": 427, "long": 396, "ultra_long": 153}
    durations = {"ultra_short": 40, "short": 300, "medium": 1200, "long": 2700, "ultra_long": 4000}
    fmts, mods = ["keyword", "phrase", "sentence"], ["vision", "audio", "vision_audio"]
    recs = []
    for name, n in counts.items():
        for i in range(n):
            recs.append(q(f"{name}-{i:03d}", duration=durations[name], fmt=fmts[i % 3], modality=mods[i % 3]))
    rng = random.Random(0)
    preds = {r.query_id: RangeSet.from_pairs([(rng.uniform(0, 15), rng.uniform(15, 30))]) for r in recs}
    rep = report(evaluate(recs, preds))
    assert [r.n_queries for r in rep.axis("duration")] == [183, 439, 427, 396, 153]
    assert rep.overall.n_queries == 1598
    for axis in ("duration", "format", "modality"):
        assert sum(r.n_queries for r in rep.axis(axis)) == rep.overall.n_queries
    shuffled = recs[:]
    rng.shuffle(shuffled)
    assert report(evaluate(shuffled, preds)) == rep


def test_markdown_and_dict():
    recs = [q("a")]
    rep = report(evaluate(recs, {"a": recs[0].gt}), 11)
    md = rep.to_markdown()
    assert md.splitlines()[0].startswith("| Axis")
    assert len({len(line) for line in md.splitlines()}) == 1
    assert rep.to_dict()["rows"][-1]["slice"] == "overall"
