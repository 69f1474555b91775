"""Bookkeeping between wall-clock time and token indices, plus closed-form score counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

from trkit.errors import InvalidRangeError
from trkit.intervals import TimeRange


@dataclass(frozen=True)
class TokenTimeline:
    fps: float = 1.0
    visual_tokens_per_frame: int = 400
    audio_tokens_per_second: int = 1
    audio_sample_rate: int = 16000

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if min(self.visual_tokens_per_frame, self.audio_tokens_per_second, self.audio_sample_rate) < 1:
            raise ValueError("token counts and sample rate must be >= 1")

    def n_frames(self, duration_s: float) -> int:
        # round first so 3600 * 1.0 style products never tip over an integer
        return math.ceil(round(duration_s * self.fps, 9))

    def n_visual_tokens(self, duration_s: float) -> int:
        return self.n_frames(duration_s) * self.visual_tokens_per_frame

    def n_audio_samples(self, duration_s: float) -> int:
        return math.ceil(round(duration_s * self.audio_sample_rate, 9))


def op_count(tl: TokenTimeline, duration_s: float, mode: str = "diagonal") -> int:
    """Visual-to-visual attention score entries for a video of ``duration_s``.

    ``full``: every visual token scores every other, ``N**2``.
    ``diagonal``: per-frame blocks, ``frames * tokens_per_frame**2``.
    """
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    frames = tl.n_frames(duration_s)
    per_frame = tl.visual_tokens_per_frame
    if mode == "full":
        return (frames * per_frame) ** 2
    if mode == "diagonal":
        return frames * per_frame**2
    raise ValueError(f"unknown mode {mode!r}")


def tokens_for_time(
    tl: TokenTimeline, span: TimeRange | tuple[float, float], video_duration_s: float | None = None
) -> tuple[range, range]:
    """Half-open visual and audio token index spans covering a time range."""
    start, end = (span.start_s, span.end_s) if isinstance(span, TimeRange) else span
    if start < 0 or end < start:
        raise InvalidRangeError(f"invalid time range [{start}, {end})")
    if video_duration_s is not None and end > video_duration_s:
        raise InvalidRangeError(f"range end {end} beyond video duration {video_duration_s}")
    if start == end:
        return range(0), range(0)
    f0 = math.floor(round(start * tl.fps, 9))
    f1 = math.ceil(round(end * tl.fps, 9))
    a0 = math.floor(round(start * tl.audio_tokens_per_second, 9))
    a1 = math.ceil(round(end * tl.audio_tokens_per_second, 9))
    tpf = tl.visual_tokens_per_frame
    return range(f0 * tpf, f1 * tpf), range(a0, a1)


def time_for_token(tl: TokenTimeline, index: int, modality: str = "visual") -> float:
    """Start time of the sampling stride a token belongs to."""
    if index < 0:
        raise IndexError(index)
    if modality == "visual":
        return (index // tl.visual_tokens_per_frame) / tl.fps
    if modality == "audio":
        return index / tl.audio_tokens_per_second
    raise ValueError(f"unknown modality {modality!r}")
