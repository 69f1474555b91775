"""Seeded planner for synthetic timestamp-supervised training data.

Images become pseudo-video segments by sliding a crop window across them;
audio clips are shuffled and concatenated. Every segment keeps its source
caption, so (time range, caption) supervision falls out for free. Nothing
here touches pixels or waveforms: the output is a plan.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

CORNERS = ("top_left", "top_right", "bottom_left", "bottom_right")
DIRECTIONS = ("left", "right", "up", "down")
OBJECTIVES = ("caption_prediction", "timestamp_localization")


@dataclass(frozen=True)
class SlidingWindowParams:
    window_w: int
    window_h: int
    start_corner: str
    direction: str
    speed: int
    duration_s: float

    def validate(self, image_w: int, image_h: int) -> None:
        if self.start_corner not in CORNERS:
            raise ValueError(f"unknown start corner {self.start_corner!r}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.window_w < 1 or self.window_h < 1:
            raise ValueError("window must be at least 1x1")
        if self.window_w > image_w or self.window_h > image_h:
            raise ValueError(f"window {self.window_w}x{self.window_h} larger than image {image_w}x{image_h}")
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if not self.duration_s > 0:
            raise ValueError("duration must be positive")


@dataclass(frozen=True)
class CropSchedule:
    source_image_id: str
    image_w: int
    image_h: int
    rects: tuple[tuple[int, int, int, int], ...]


@dataclass(frozen=True)
class Segment:
    modality: str
    source_id: str
    caption: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class SyntheticManifest:
    seed: int
    segments: tuple[Segment, ...]
    total_duration_s: float
    active_modality: str
    crop_schedules: tuple[CropSchedule, ...] = field(default=())
    fps: float = 1.0

    @property
    def padded_modality(self) -> str:
        return "audio" if self.active_modality == "visual" else "visual"

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "fps": self.fps,
            "active_modality": self.active_modality,
            "padded_modality": self.padded_modality,
            "total_duration_s": self.total_duration_s,
            "segments": [asdict(s) for s in self.segments],
            "crop_schedules": [
                {"source_image_id": c.source_image_id, "image_w": c.image_w, "image_h": c.image_h,
                 "rects": [list(r) for r in c.rects]}
                for c in self.crop_schedules
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class TrainingExample:
    objective: str
    prompt: str
    target: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class RandomizationRanges:
    """Ranges the visual planner samples from. Windows are square."""

    window_frac: tuple[float, float] = (0.25, 0.75)
    speed_frac: tuple[float, float] = (0.0, 0.05)
    segment_s: tuple[int, int] = (5, 30)


def plan_sliding_window(image_w: int, image_h: int, params: SlidingWindowParams, fps: float = 1.0,
                        source_image_id: str = "") -> CropSchedule:
    """One crop rect per frame; the window stops at the image border instead of leaving it."""
    params.validate(image_w, image_h)
    if not fps > 0:
        raise ValueError("fps must be positive")
    n = math.ceil(round(params.duration_s * fps, 9))
    max_x, max_y = image_w - params.window_w, image_h - params.window_h
    x = 0 if params.start_corner.endswith("left") else max_x
    y = 0 if params.start_corner.startswith("top") else max_y
    dx, dy = {"left": (-1, 0), "right": (1, 0), "up": (0, -1), "down": (0, 1)}[params.direction]
    rects = []
    for _ in range(n):
        rects.append((x, y, params.window_w, params.window_h))
        x = min(max(x + dx * params.speed, 0), max_x)
        y = min(max(y + dy * params.speed, 0), max_y)
    return CropSchedule(source_image_id, image_w, image_h, tuple(rects))


def random_window_params(rng: np.random.Generator, image_w: int, image_h: int, duration_s: float,
                         ranges: RandomizationRanges = RandomizationRanges()) -> SlidingWindowParams:
    short = min(image_w, image_h)
    lo = max(1, math.ceil(ranges.window_frac[0] * short))
    hi = max(lo, math.floor(ranges.window_frac[1] * short))
    side = int(rng.integers(lo, hi + 1))
    direction = DIRECTIONS[int(rng.integers(len(DIRECTIONS)))]
    axis = image_w if direction in ("left", "right") else image_h
    speed = int(rng.integers(math.floor(ranges.speed_frac[0] * axis), math.floor(ranges.speed_frac[1] * axis) + 1))
    corner = CORNERS[int(rng.integers(len(CORNERS)))]
    return SlidingWindowParams(side, side, corner, direction, speed, duration_s)


def _lay_out(entries: Iterable[tuple[str, str, float]], modality: str) -> tuple[tuple[Segment, ...], float]:
    segments, t = [], 0.0
    for source_id, caption, length in entries:
        segments.append(Segment(modality, source_id, caption, t, t + length))
        t += length
    return tuple(segments), t


def splice_audio(clips: Sequence[tuple[str, float, str]], seed: int) -> SyntheticManifest:
    """Concatenate ``(clip_id, length_s, caption)`` clips in a seeded random order."""
    if not clips:
        raise ValueError("no audio clips to splice")
    for clip_id, length, _ in clips:
        if not length > 0:
            raise ValueError(f"clip {clip_id!r} has non-positive length {length}")
    order = np.random.default_rng(seed).permutation(len(clips))
    segments, total = _lay_out(((clips[i][0], clips[i][2], clips[i][1]) for i in order), "audio")
    return SyntheticManifest(seed, segments, total, "audio")


@dataclass(frozen=True)
class ImageItem:
    image_id: str
    caption: str
    width: int = 1920
    height: int = 1080


def assemble_visual(items: Sequence[ImageItem | tuple], params_rng_seed: int, fps: float = 1.0,
                    segment_s: float | None = None,
                    ranges: RandomizationRanges = RandomizationRanges()) -> SyntheticManifest:
    """Lay images end to end as sliding-window segments.

    Each image gets a random integer duration in ``ranges.segment_s`` unless
    ``segment_s`` fixes it, plus random window parameters.
    """
    if not items:
        raise ValueError("no images to assemble")
    rng = np.random.default_rng(params_rng_seed)
    items = [it if isinstance(it, ImageItem) else ImageItem(*it) for it in items]
    entries, schedules = [], []
    for it in items:
        length = segment_s if segment_s is not None else int(rng.integers(ranges.segment_s[0], ranges.segment_s[1] + 1))
        params = random_window_params(rng, it.width, it.height, length, ranges)
        schedules.append(plan_sliding_window(it.width, it.height, params, fps, it.image_id))
        entries.append((it.image_id, it.caption, length))
    segments, total = _lay_out(entries, "visual")
    return SyntheticManifest(params_rng_seed, segments, total, "visual", tuple(schedules), fps)


def render_range(start_s: float, end_s: float) -> str:
    return f"{start_s:.1f}-{end_s:.1f}"


def emit_tasks(manifest: SyntheticManifest) -> list[TrainingExample]:
    """Two examples per segment: caption from time range, and time range from caption."""
    out = []
    kind = "video" if manifest.active_modality == "visual" else "audio track"
    for seg in manifest.segments:
        span = render_range(seg.start_s, seg.end_s)
        out.append(TrainingExample(
            "caption_prediction",
            f"Describe what happens in the {kind} during {span} seconds.",
            seg.caption,
        ))
        out.append(TrainingExample(
            "timestamp_localization",
            f'Give the time range in the {kind} that matches the description: "{seg.caption}".',
            span,
        ))
    return out
