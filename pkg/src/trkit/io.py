"""JSON-lines readers and writers for ground truth, predictions and candidates.

Every malformed line is reported as a :class:`SchemaError` carrying the file
name and 1-based line number. Filesystem problems become :class:`InputIOError`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from trkit.errors import InputIOError, InvalidRangeError, SchemaError
from trkit.intervals import RangeSet, normalize
from trkit.metrics import QueryRecord
from trkit.parsers import parse_prediction
from trkit.postproc import CandidateQuery

SCHEMA_NAMES = ("ground_truth", "prediction", "candidate", "report", "manifest", "training_example")


def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(name)
    return json.loads(resources.files("trkit.schemas").joinpath(f"{name}.schema.json").read_text())


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputIOError(f"cannot read {path}: {exc.strerror or exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise SchemaError(f"{path}:{lineno}: expected a JSON object")
        yield lineno, obj


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputIOError(f"cannot write {path}: {exc.strerror or exc}") from None


def write_jsonl(path: str | Path, rows: Iterable[Mapping]) -> None:
    write_text(path, "".join(dumps(r) + "\n" for r in rows))


def _require(obj: dict, keys: Iterable[str], where: str) -> None:
    missing = [k for k in keys if k not in obj]
    if missing:
        raise SchemaError(f"{where}: missing field(s) {', '.join(missing)}")


def _ranges(value: Any, where: str) -> RangeSet:
    if not isinstance(value, list):
        raise SchemaError(f"{where}: ranges must be a list of [start, end] pairs")
    try:
        return normalize(value)
    except InvalidRangeError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def _number(value: Any, name: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: {name} must be a number")
    return float(value)


def load_ground_truth(path: str | Path) -> list[QueryRecord]:
    records: list[QueryRecord] = []
    seen: dict[str, int] = {}
    for lineno, obj in read_jsonl(path):
        where = f"{path}:{lineno}"
        _require(obj, ("query_id", "video_id", "query", "format", "modality", "duration_s", "gt_ranges"), where)
        qid = str(obj["query_id"])
        if qid in seen:
            raise SchemaError(f"{where}: duplicate query_id {qid!r} (first on line {seen[qid]})")
        seen[qid] = lineno
        try:
            records.append(QueryRecord(
                qid, str(obj["video_id"]), str(obj["query"]), obj["format"], obj["modality"],
                _number(obj["duration_s"], "duration_s", where), _ranges(obj["gt_ranges"], where),
            ))
        except ValueError as exc:
            msg = str(exc)
            raise SchemaError(msg if msg.startswith(where) else f"{where}: {msg}") from None
    return records


@dataclass
class PredictionSet:
    ranges: dict[str, RangeSet] = field(default_factory=dict)
    warnings: dict[str, tuple[str, ...]] = field(default_factory=dict)


def load_predictions(
    path: str | Path,
    durations: Mapping[str, float] | None = None,
    *,
    style: str = "timestamps",
    **frame_kwargs,
) -> PredictionSet:
    """Read predictions. Lines may carry ``ranges`` directly or ``raw_text`` to parse."""
    out = PredictionSet()
    seen: dict[str, int] = {}
    durations = durations or {}
    for lineno, obj in read_jsonl(path):
        where = f"{path}:{lineno}"
        _require(obj, ("query_id",), where)
        qid = str(obj["query_id"])
        if qid in seen:
            raise SchemaError(f"{where}: duplicate query_id {qid!r} (first on line {seen[qid]})")
        seen[qid] = lineno
        if "ranges" in obj:
            out.ranges[qid] = _ranges(obj["ranges"], where)
        elif "raw_text" in obj:
            if not isinstance(obj["raw_text"], str):
                raise SchemaError(f"{where}: raw_text must be a string")
            try:
                parsed = parse_prediction(obj["raw_text"], durations.get(qid), style=style, **frame_kwargs)
            except (InvalidRangeError, IndexError) as exc:
                # out-of-range frame indices: score as an empty answer
                out.ranges[qid] = RangeSet()
                out.warnings[qid] = (f"parse error: {exc}",)
                continue
            out.ranges[qid] = parsed.ranges
            if parsed.warnings:
                out.warnings[qid] = parsed.warnings
        else:
            raise SchemaError(f"{where}: needs either ranges or raw_text")
    return out


def load_candidates(path: str | Path) -> list[CandidateQuery]:
    out = []
    for lineno, obj in read_jsonl(path):
        where = f"{path}:{lineno}"
        _require(obj, ("query", "ranges", "confidence"), where)
        try:
            out.append(CandidateQuery(
                str(obj["query"]), _ranges(obj["ranges"], where),
                _number(obj["confidence"], "confidence", where), obj.get("source", "caption"),
            ))
        except ValueError as exc:
            msg = str(exc)
            raise SchemaError(msg if msg.startswith(where) else f"{where}: {msg}") from None
    return out


def load_lines(path: str | Path) -> list[str]:
    """Non-empty, non-comment lines of a text file (used for blocklists)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputIOError(f"cannot read {path}: {exc.strerror or exc}") from None
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
