"""Set arithmetic over multi-span time ranges and the per-sample P/R/IoU triple.

Ranges are closed-open in spirit: a range contributes ``end_s - start_s``
seconds of measure, and two ranges that merely touch share no measure.
Zero-length ranges survive normalization but never contribute measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from trkit.errors import InvalidRangeError


@dataclass(frozen=True, order=True)
class TimeRange:
    start_s: float
    end_s: float

    def __post_init__(self):
        if math.isnan(self.start_s) or math.isnan(self.end_s):
            raise InvalidRangeError(f"NaN endpoint in {self!r}")
        if self.start_s < 0:
            raise InvalidRangeError(f"negative start in {self!r}")
        if self.start_s > self.end_s:
            raise InvalidRangeError(f"start after end in {self!r}")

    @property
    def length(self) -> float:
        return self.end_s - self.start_s

    def as_list(self) -> list[float]:
        return [self.start_s, self.end_s]


@dataclass(frozen=True)
class RangeSet:
    """Sorted, strictly disjoint ranges. Build with :func:`normalize`."""

    ranges: tuple[TimeRange, ...] = ()

    def __post_init__(self):
        for a, b in zip(self.ranges, self.ranges[1:]):
            if not a.end_s < b.start_s:
                raise InvalidRangeError(f"ranges not sorted/disjoint: {a} then {b}")

    def __iter__(self) -> Iterator[TimeRange]:
        return iter(self.ranges)

    def __len__(self) -> int:
        return len(self.ranges)

    def __bool__(self) -> bool:
        return bool(self.ranges)

    @property
    def measure(self) -> float:
        return measure(self)

    def as_lists(self) -> list[list[float]]:
        return [r.as_list() for r in self.ranges]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], merge_gap: float = 0.0) -> "RangeSet":
        return normalize(_coerce(pairs), merge_gap)


@dataclass(frozen=True)
class SampleScores:
    precision: float
    recall: float
    iou: float
    degenerate: bool = field(default=False, compare=False)

    def get(self, metric: str) -> float:
        return {"P": self.precision, "R": self.recall, "IoU": self.iou}[metric]


def _coerce(ranges: Iterable) -> list[TimeRange]:
    out = []
    for i, r in enumerate(ranges):
        if isinstance(r, TimeRange):
            out.append(r)
            continue
        try:
            s, e = r
            out.append(TimeRange(float(s), float(e)))
        except InvalidRangeError as exc:
            raise InvalidRangeError(f"invalid range at index {i}: {exc}", index=i) from None
        except (TypeError, ValueError):
            raise InvalidRangeError(f"invalid range at index {i}: {r!r}", index=i) from None
    return out


def normalize(ranges: Iterable[TimeRange | Sequence[float]], merge_gap: float = 0.0) -> RangeSet:
    """Sort and merge ranges; ranges whose gap is ``<= merge_gap`` are fused.

    Raises :class:`InvalidRangeError` naming the index of the first bad range.
    """
    if merge_gap < 0 or math.isnan(merge_gap):
        raise ValueError(f"merge_gap must be >= 0, got {merge_gap}")
    items = sorted(_coerce(ranges))
    if not items:
        return RangeSet()
    merged: list[list[float]] = [[items[0].start_s, items[0].end_s]]
    for r in items[1:]:
        last = merged[-1]
        if r.start_s - last[1] <= merge_gap:
            if r.end_s > last[1]:
                last[1] = r.end_s
        else:
            merged.append([r.start_s, r.end_s])
    return RangeSet(tuple(TimeRange(s, e) for s, e in merged))


def measure(rs: RangeSet) -> float:
    return math.fsum(r.end_s - r.start_s for r in rs.ranges)


def intersect(a: RangeSet, b: RangeSet) -> RangeSet:
    # Two-pointer sweep; zero-measure overlaps are dropped.
    out = []
    i = j = 0
    ra, rb = a.ranges, b.ranges
    while i < len(ra) and j < len(rb):
        lo = max(ra[i].start_s, rb[j].start_s)
        hi = min(ra[i].end_s, rb[j].end_s)
        if lo < hi:
            out.append(TimeRange(lo, hi))
        if ra[i].end_s < rb[j].end_s:
            i += 1
        else:
            j += 1
    return RangeSet(tuple(out))


def union(a: RangeSet, b: RangeSet) -> RangeSet:
    return normalize(list(a.ranges) + list(b.ranges), 0.0)


def score(pred: RangeSet, gt: RangeSet) -> SampleScores:
    """Precision, recall and IoU of ``pred`` against ``gt`` along the time axis.

    Empty (zero-measure) sides: one empty side scores 0 across the board,
    both empty scores 1 with ``degenerate=True``.
    """
    mp = measure(pred)
    mg = measure(gt)
    if mp == 0 and mg == 0:
        return SampleScores(1.0, 1.0, 1.0, degenerate=True)
    if mp == 0 or mg == 0:
        return SampleScores(0.0, 0.0, 0.0)
    inter = measure(intersect(pred, gt))
    uni = measure(union(pred, gt))
    return SampleScores(inter / mp, inter / mg, inter / uni)
