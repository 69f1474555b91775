"""Rule-based cleanup of generated (query, time ranges, confidence) triples.

Rules run in a fixed order: merge nearby ranges, then drop on low
confidence, on too many ranges, and on templated phrasing. A dropped
candidate is reported once, under the first rule it fails.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

from trkit.intervals import RangeSet, normalize
from trkit.metrics import QueryFormat

DEFAULT_BLOCKLIST = ("the video concludes", "in the closing moments")


class DropReason(str, Enum):
    EMPTY_AFTER_MERGE = "empty_after_merge"
    LOW_CONFIDENCE = "low_confidence"
    TOO_GENERAL = "too_general"
    MACHINE_STYLE = "machine_style"


@dataclass(frozen=True)
class CandidateQuery:
    query_text: str
    ranges: RangeSet
    confidence: float
    source: str = "caption"

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.source not in ("caption", "subtitle", "mixed"):
            raise ValueError(f"unknown source {self.source!r}")
        if not isinstance(self.ranges, RangeSet):
            # Overlaps collapse here; gaps survive until merge_rule.
            object.__setattr__(self, "ranges", normalize(self.ranges))

    @classmethod
    def from_dict(cls, obj: dict) -> "CandidateQuery":
        return cls(obj["query"], obj["ranges"], float(obj["confidence"]), obj.get("source", "caption"))

    def to_dict(self) -> dict:
        return {"query": self.query_text, "ranges": self.ranges.as_lists(),
                "confidence": self.confidence, "source": self.source}


@dataclass(frozen=True)
class FilterConfig:
    gap_s: float = 0.5
    min_confidence: float = 0.9
    max_ranges: int = 10
    blocklist: tuple[str, ...] = DEFAULT_BLOCKLIST


@dataclass
class FilterReport:
    kept: list[CandidateQuery] = field(default_factory=list)
    dropped: list[tuple[CandidateQuery, DropReason]] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out = {"kept": len(self.kept)}
        for reason in DropReason:
            out[reason.value] = sum(1 for _, r in self.dropped if r is reason)
        return out

    def summary_table(self) -> str:
        rows = list(self.counts().items())
        width = max(len(k) for k, _ in rows)
        lines = [f"| {'outcome'.ljust(width)} | count |", f"|{'-' * (width + 2)}|-------|"]
        lines += [f"| {k.ljust(width)} | {v:>5} |" for k, v in rows]
        return "\n".join(lines) + "\n"


def merge_rule(q: CandidateQuery, gap_s: float = 0.5) -> CandidateQuery:
    return replace(q, ranges=normalize(q.ranges, merge_gap=gap_s))


def confidence_rule(q: CandidateQuery, threshold: float = 0.9) -> bool:
    return q.confidence >= threshold


def generality_rule(q: CandidateQuery, max_ranges: int = 10) -> bool:
    return len(q.ranges) <= max_ranges


def _pattern(phrase: str) -> re.Pattern:
    words = phrase.strip().split()
    return re.compile(r"\b" + r"\s+".join(map(re.escape, words)) + r"\b", re.IGNORECASE)


def style_rule(q: CandidateQuery, blocklist: Sequence[str] = DEFAULT_BLOCKLIST) -> bool:
    return not any(_pattern(p).search(q.query_text) for p in blocklist if p.strip())


# Format heuristic. Word lists are deliberately small and English-only.
_FUNCTION_WORDS = frozenset(
    "a an the this that these those of in on at to for with by from into onto over under "
    "and or but as while during near his her their its my our your".split()
)
_AUXILIARIES = frozenset(
    "is are was were be been am has have had do does did can could will would shall should "
    "may might must isn't aren't wasn't weren't doesn't don't didn't".split()
)
_WORD_RE = re.compile(r"[A-Za-z][A-Za-z'\-]*")


@dataclass(frozen=True)
class FormatThresholds:
    keyword_max_words: int = 4
    sentence_min_words: int = 8


def _has_finite_verb(words: list[str]) -> bool:
    # Auxiliaries, or -ed forms (past tense and passive participles).
    return any(w in _AUXILIARIES or (len(w) > 4 and w.endswith("ed")) for w in words)


def classify_format(query_text: str, thresholds: FormatThresholds = FormatThresholds()) -> QueryFormat:
    """Label a query as keyword, phrase or sentence.

    keyword: few words, no function words, no finite verb.
    sentence: long enough and carrying a finite verb or closing punctuation.
    Everything else is a phrase.
    """
    text = query_text.strip()
    if not text:
        raise ValueError("cannot classify empty query text")
    words = [w.lower() for w in _WORD_RE.findall(text)]
    verb = _has_finite_verb(words)
    if len(words) >= thresholds.sentence_min_words and (verb or text[-1] in ".!?"):
        return QueryFormat.SENTENCE
    if len(words) <= thresholds.keyword_max_words and not verb and not _FUNCTION_WORDS.intersection(words):
        return QueryFormat.KEYWORD
    return QueryFormat.PHRASE


def _first_failure(q: CandidateQuery, cfg: FilterConfig) -> DropReason | None:
    if q.ranges.measure == 0:
        return DropReason.EMPTY_AFTER_MERGE
    if not confidence_rule(q, cfg.min_confidence):
        return DropReason.LOW_CONFIDENCE
    if not generality_rule(q, cfg.max_ranges):
        return DropReason.TOO_GENERAL
    if not style_rule(q, cfg.blocklist):
        return DropReason.MACHINE_STYLE
    return None


def pipeline(candidates: Iterable[CandidateQuery], config: FilterConfig = FilterConfig()) -> FilterReport:
    out = FilterReport()
    for q in candidates:
        merged = merge_rule(q, config.gap_s)
        reason = _first_failure(merged, config)
        if reason is None:
            out.kept.append(merged)
        else:
            out.dropped.append((q, reason))
    return out
