"""Turn free-form model answers into canonical :class:`RangeSet` predictions.

Two answer styles are handled:

* frame-index lists such as ``"2-4, 6-8"``, produced when a model is shown
  numbered frames and asked for index ranges;
* clock/second time ranges in loosely formatted prose, e.g.
  ``"From 1:02:30 to 1:04:31"`` or ``"00:15-00:20; 01:00-01:05"``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from trkit.errors import ParseError, TrkitError
from trkit.intervals import RangeSet, TimeRange, normalize

_SEP = r"\s*(?:-|–|—|~|\bto\b)\s*"

_FRAME_RE = re.compile(r"(?<![\d.:])(\d+)(?:" + _SEP + r"(\d+))?(?![\d.:])")

# clock ``[h:]m:ss[.fff]`` or bare seconds ``ss[.fff]``, optional unit suffix
_TS = r"(?:\d+:)?\d{1,2}:\d{2}(?:\.\d+)?|\d+(?:\.\d+)?"
_UNIT = r"(?:\s*(?:seconds?|secs?|s)\b)?"
_STAMP = r"(?<![\w.:])(" + _TS + r")" + _UNIT
_RANGE_RE = re.compile(
    r"(?:\bbetween\s+" + _STAMP + r"\s+and\s+" + _STAMP + r")"
    r"|(?:[\[(]\s*" + _STAMP + r"\s*,\s*" + _STAMP + r"\s*[\])])"
    r"|(?:" + _STAMP + _SEP + _STAMP + r")",
    re.IGNORECASE,
)
_LONE_STAMP_RE = re.compile(r"(?<![\w.:])(?:\d+:)?\d{1,2}:\d{2}(?:\.\d+)?(?![\w:])|(?<![\w.:])\d+(?:\.\d+)?(?![\w.:])")
_LIST_MARKER_RE = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+", re.MULTILINE)


class FrameIndexError(TrkitError, IndexError):
    def __init__(self, indices: Sequence[int], n_frames: int):
        super().__init__(f"frame indices {list(indices)} out of range for {n_frames} frames")
        self.indices = list(indices)


@dataclass(frozen=True)
class FrameRange:
    first: int
    last: int

    def __post_init__(self):
        if self.first < 0 or self.first > self.last:
            raise ValueError(f"invalid frame range {self.first}-{self.last}")


@dataclass(frozen=True)
class ParseOutcome:
    ranges: RangeSet
    warnings: tuple[str, ...] = field(default=())


def parse_frame_ranges(text: str) -> list[FrameRange]:
    """Extract ``a-b`` index pairs and lone indices, in order of appearance.

    Reversed pairs (``8-6``) are read as the range they span.
    """
    out = []
    for m in _FRAME_RE.finditer(text):
        a = int(m.group(1))
        b = int(m.group(2)) if m.group(2) is not None else a
        out.append(FrameRange(min(a, b), max(a, b)))
    if not out:
        raise ParseError(f"no frame index found in {text!r}", text)
    return out


def frames_to_time(
    frames: Sequence[FrameRange],
    fps: float | None = None,
    n_frames: int | None = None,
    video_duration_s: float | None = None,
    *,
    mode: str = "dense",
    coverage: str = "stride",
    index_base: int = 0,
) -> RangeSet:
    """Map frame-index ranges back onto the video time axis.

    ``dense``: frame ``i`` was sampled at ``i / fps``. ``uniform``: ``n_frames``
    frames were spread evenly over the video, so the stride is
    ``video_duration_s / n_frames``. With ``coverage="stride"`` a frame owns
    one full stride; ``"instant"`` maps it to its sampling time only.
    """
    if mode == "dense":
        if not fps or fps <= 0:
            raise ValueError("dense mode needs fps > 0")
        stride = 1.0 / fps
    elif mode == "uniform":
        if not n_frames or not video_duration_s or video_duration_s <= 0:
            raise ValueError("uniform mode needs n_frames and video_duration_s")
        stride = video_duration_s / n_frames
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if coverage not in ("stride", "instant"):
        raise ValueError(f"unknown coverage {coverage!r}")

    shifted = [(f.first - index_base, f.last - index_base) for f in frames]
    bad = sorted({i for pair in shifted for i in pair if i < 0 or (n_frames is not None and i >= n_frames)})
    if bad:
        raise FrameIndexError([i + index_base for i in bad], n_frames if n_frames is not None else 0)

    out = []
    for first, last in shifted:
        start = first * stride
        end = (last + 1) * stride if coverage == "stride" else last * stride
        if video_duration_s is not None:
            start, end = min(start, video_duration_s), min(end, video_duration_s)
        out.append(TimeRange(start, end))
    return normalize(out, 0.0)


def sampling_for(video_duration_s: float, max_frames: int = 120, fps: float = 1.0) -> dict:
    """Frame-sampling parameters for a frame-capped API: dense at ``fps``
    unless that would exceed ``max_frames``, then ``max_frames`` uniform frames."""
    if video_duration_s * fps > max_frames:
        return {"mode": "uniform", "n_frames": max_frames, "video_duration_s": video_duration_s}
    return {"mode": "dense", "fps": fps, "video_duration_s": video_duration_s}


def _seconds(stamp: str) -> float:
    parts = stamp.split(":")
    value = 0.0
    for p in parts:
        value = value * 60 + float(p)
    return value


def _clock_ok(stamp: str) -> bool:
    parts = stamp.split(":")
    return all(float(p) < 60 for p in parts[1:])


def parse_timestamps(text: str, video_duration_s: float | None = None) -> ParseOutcome:
    """Extract every time range from a free-form answer.

    Endpoints may be ``ss``, ``ss.fff``, ``mm:ss`` or ``hh:mm:ss`` (each with an
    optional ``s``/``sec`` suffix), joined by ``-``, en/em dash, ``~``,
    ``to``, ``between .. and ..`` or written as a bracketed pair ``[a, b]``.
    Leftover numerals and out-of-bounds endpoints produce warnings rather
    than errors. Raises :class:`ParseError` if the text is nonempty and no
    range is found.
    """
    body = _LIST_MARKER_RE.sub(" ", text)
    warnings: list[str] = []
    found: list[TimeRange] = []
    matched_any = False
    for m in _RANGE_RE.finditer(body):
        matched_any = True
        a, b = [g for g in m.groups() if g is not None]
        if not (_clock_ok(a) and _clock_ok(b)):
            warnings.append(f"malformed clock value in {m.group(0)!r}")
            continue
        start, end = _seconds(a), _seconds(b)
        if start > end:
            warnings.append(f"reversed range {m.group(0)!r} skipped")
            continue
        if video_duration_s is not None:
            if start >= video_duration_s and end > start:
                warnings.append(f"range {m.group(0)!r} starts beyond video end {video_duration_s}; dropped")
                continue
            if end > video_duration_s:
                warnings.append(f"range {m.group(0)!r} clamped to video end {video_duration_s}")
                end = video_duration_s
                start = min(start, end)
        found.append(TimeRange(start, end))
    leftover = _RANGE_RE.sub(" ", body)
    for m in _LONE_STAMP_RE.finditer(leftover):
        warnings.append(f"unpaired time value {m.group(0)!r} ignored")
    if not matched_any and text.strip():
        raise ParseError(f"no time range found in {text!r}", text)
    return ParseOutcome(normalize(found, 0.0), tuple(warnings))


def parse_prediction(
    text: str,
    video_duration_s: float | None = None,
    *,
    style: str = "timestamps",
    **frame_kwargs,
) -> ParseOutcome:
    """Parse one raw answer; unparseable answers become an empty prediction with a warning."""
    try:
        if style == "timestamps":
            return parse_timestamps(text, video_duration_s)
        if style == "frames":
            rs = frames_to_time(parse_frame_ranges(text), video_duration_s=video_duration_s, **frame_kwargs)
            return ParseOutcome(rs)
        raise ValueError(f"unknown answer style {style!r}")
    except ParseError as exc:
        return ParseOutcome(RangeSet(), (f"parse error: {exc}",))
