"""Dataset-level scoring: accuracy-threshold curves, AUC, and sliced reports."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from trkit.errors import SchemaError
from trkit.intervals import RangeSet, SampleScores, score

METRICS = ("P", "R", "IoU")


class QueryFormat(str, Enum):
    KEYWORD = "keyword"
    PHRASE = "phrase"
    SENTENCE = "sentence"


class QueryModality(str, Enum):
    VISION = "vision"
    AUDIO = "audio"
    VISION_AUDIO = "vision_audio"

    @classmethod
    def parse(cls, value: str) -> "QueryModality":
        key = value.strip().lower().replace("+", "_").replace("-", "_").replace(" ", "_")
        return cls(key)


@dataclass(frozen=True)
class DurationBucket:
    name: str
    lower_s: float
    upper_s: float


BUCKETS: tuple[DurationBucket, ...] = (
    DurationBucket("ultra_short", 0.0, 60.0),
    DurationBucket("short", 60.0, 600.0),
    DurationBucket("medium", 600.0, 1800.0),
    DurationBucket("long", 1800.0, 3600.0),
    DurationBucket("ultra_long", 3600.0, math.inf),
)


def bucket(duration_s: float) -> DurationBucket:
    """Duration category, left-inclusive: 60 s is already ``short``."""
    if not duration_s > 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    for b in BUCKETS:
        if b.lower_s <= duration_s < b.upper_s:
            return b
    raise ValueError(f"duration not bucketable: {duration_s}")


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    video_id: str
    query_text: str
    format: QueryFormat
    modality: QueryModality
    video_duration_s: float
    gt: RangeSet

    def __post_init__(self):
        if not self.gt:
            raise SchemaError(f"query {self.query_id!r}: empty ground truth")
        if not self.video_duration_s > 0:
            raise SchemaError(f"query {self.query_id!r}: non-positive duration")
        if self.gt.ranges[-1].end_s > self.video_duration_s:
            raise SchemaError(
                f"query {self.query_id!r}: ground truth ends at {self.gt.ranges[-1].end_s} "
                f"beyond video duration {self.video_duration_s}"
            )
        object.__setattr__(self, "format", QueryFormat(self.format))
        object.__setattr__(self, "modality", QueryModality.parse(str(getattr(self.modality, "value", self.modality))))

    @property
    def bucket(self) -> DurationBucket:
        return bucket(self.video_duration_s)


@dataclass(frozen=True)
class ScoredQuery:
    record: QueryRecord
    scores: SampleScores
    missing: bool = False

    def __iter__(self):
        # unpacks as the (record, scores) pair
        return iter((self.record, self.scores))


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    accuracy: float


def evaluate(queries: Sequence[QueryRecord], preds: Mapping[str, RangeSet]) -> list[ScoredQuery]:
    """Score each query against its prediction; missing predictions score as empty."""
    dupes = [k for k, n in Counter(q.query_id for q in queries).items() if n > 1]
    if dupes:
        raise SchemaError(f"duplicate query_id in ground truth: {sorted(dupes)}")
    out = []
    for q in sorted(queries, key=lambda q: q.query_id):
        pred = preds.get(q.query_id)
        out.append(ScoredQuery(q, score(pred if pred is not None else RangeSet(), q.gt), missing=pred is None))
    return out


def thresholds(grid_n: int) -> list[float]:
    if grid_n < 2:
        raise ValueError(f"grid_n must be >= 2, got {grid_n}")
    return [k / (grid_n - 1) for k in range(grid_n)]


def curve(scores: Sequence[SampleScores], metric: str, grid_n: int = 1001) -> list[CurvePoint]:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if not scores:
        raise ValueError("cannot build a curve over an empty dataset")
    values = sorted(s.get(metric) for s in scores)
    n = len(values)
    points = []
    # values sorted ascending, thresholds ascending: advance a single cursor
    below = 0
    for tau in thresholds(grid_n):
        while below < n and values[below] < tau:
            below += 1
        points.append(CurvePoint(tau, (n - below) / n))
    return points


def auc(points: Sequence[CurvePoint]) -> float:
    """Trapezoidal area under an accuracy-threshold curve on a uniform grid over [0, 1]."""
    if len(points) < 2:
        raise ValueError("curve needs at least two points")
    n = len(points)
    for k, p in enumerate(points):
        if not math.isclose(p.threshold, k / (n - 1), rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"curve grid is not uniform/sorted over [0,1] at point {k}: {p.threshold}")
    h = 1.0 / (n - 1)
    acc = [p.accuracy for p in points]
    return h * (math.fsum(acc) - 0.5 * (acc[0] + acc[-1]))


@dataclass(frozen=True)
class ReportRow:
    axis: str
    slice_name: str
    p_auc: float
    r_auc: float
    iou_auc: float
    n_queries: int

    def as_dict(self) -> dict:
        return {
            "axis": self.axis,
            "slice": self.slice_name,
            "P": self.p_auc,
            "R": self.r_auc,
            "IoU": self.iou_auc,
            "n_queries": self.n_queries,
        }


@dataclass(frozen=True)
class Report:
    rows: tuple[ReportRow, ...]
    grid_n: int
    n_missing: int = 0
    curves: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def overall(self) -> ReportRow:
        return next(r for r in self.rows if r.axis == "overall")

    def axis(self, name: str) -> list[ReportRow]:
        return [r for r in self.rows if r.axis == name]

    def row(self, axis: str, slice_name: str) -> ReportRow | None:
        return next((r for r in self.rows if r.axis == axis and r.slice_name == slice_name), None)

    def to_dict(self) -> dict:
        return {
            "grid_n": self.grid_n,
            "n_missing_predictions": self.n_missing,
            "rows": [r.as_dict() for r in self.rows],
        }

    def to_markdown(self, digits: int = 1) -> str:
        header = ["Axis", "Slice", "P-bar", "R-bar", "IoU-bar", "# Queries"]
        body = [
            [r.axis, r.slice_name, f"{100 * r.p_auc:.{digits}f}", f"{100 * r.r_auc:.{digits}f}",
             f"{100 * r.iou_auc:.{digits}f}", str(r.n_queries)]
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]

        def fmt(cells):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

        lines = [fmt(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        lines += [fmt(b) for b in body]
        return "\n".join(lines) + "\n"


AXES = {
    "duration": (lambda q: q.bucket.name, [b.name for b in BUCKETS]),
    "format": (lambda q: q.format.value, [f.value for f in QueryFormat]),
    "modality": (lambda q: q.modality.value, [m.value for m in QueryModality]),
}


def _row(axis: str, name: str, scores: list[SampleScores], grid_n: int) -> ReportRow:
    p, r, i = (auc(curve(scores, m, grid_n)) for m in METRICS)
    return ReportRow(axis, name, p, r, i, len(scores))


def report(
    evaluated: Iterable[ScoredQuery | tuple[QueryRecord, SampleScores]],
    grid_n: int = 1001,
    axes: Iterable[str] = ("duration", "format", "modality"),
) -> Report:
    evaluated = list(evaluated)
    if not evaluated:
        raise ValueError("cannot report on an empty evaluation")
    n_missing = sum(1 for e in evaluated if getattr(e, "missing", False))
    items = sorted((tuple(e)[:2] for e in evaluated), key=lambda e: e[0].query_id)
    rows = []
    for axis in axes:
        key, order = AXES[axis]
        groups: dict[str, list[SampleScores]] = {}
        for rec, sc in items:
            groups.setdefault(key(rec), []).append(sc)
        for name in order:
            if name in groups:
                rows.append(_row(axis, name, groups[name], grid_n))
    all_scores = [sc for _, sc in items]
    rows.append(_row("overall", "overall", all_scores, grid_n))
    curves = {m: curve(all_scores, m, grid_n) for m in METRICS}
    return Report(tuple(rows), grid_n, n_missing, curves)


def curves_csv(curves: Mapping[str, Sequence[CurvePoint]]) -> str:
    """Render the three per-metric curves as ``threshold,precision_acc,recall_acc,iou_acc``."""
    lines = ["threshold,precision_acc,recall_acc,iou_acc"]
    for p, r, i in zip(curves["P"], curves["R"], curves["IoU"]):
        lines.append(f"{p.threshold:.6f},{p.accuracy:.6f},{r.accuracy:.6f},{i.accuracy:.6f}")
    return "\n".join(lines) + "\n"
