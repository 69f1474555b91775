import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trkit.errors import ParseError
from trkit.intervals import RangeSet, measure
from trkit.parsers import (
    FrameIndexError,
    FrameRange,
    frames_to_time,
    parse_frame_ranges,
    parse_prediction,
    parse_timestamps,
    sampling_for,
)

CORPUS = json.loads((Path(__file__).parent / "data" / "parser_corpus.json").read_text())


def recognize_frames(text):
    """Hand-rolled character scanner for frame lists (no regex)."""
    out, i, n = [], 0, len(text)

    def number(j):
        k = j
        while k < n and text[k].isdigit():
            k += 1
        return k

    while i < n:
        if text[i].isdigit() and (i == 0 or text[i - 1] not in "0123456789.:"):
            j = number(i)
            if j < n and text[j] in ".:":
                i = j + 1
                continue
            a = int(text[i:j])
            k = j
            while k < n and text[k] == " ":
                k += 1
            if k < n and text[k] == "-":
                k += 1
                while k < n and text[k] == " ":
                    k += 1
                if k < n and text[k].isdigit():
                    m = number(k)
                    out.append((a, int(text[k:m])))
                    i = m
                    continue
            out.append((a, a))
            i = j
        else:
            i += 1
    return out


def test_frame_examples():
    assert parse_frame_ranges("2-4, 6-8") == [FrameRange(2, 4), FrameRange(6, 8)]
    with pytest.raises(ParseError):
        parse_frame_ranges("")
    assert parse_frame_ranges("frames 10-12 and 15") == [FrameRange(10, 12), FrameRange(15, 15)]


@pytest.mark.parametrize("text", ["2-4, 6-8", "frames 10-12 and 15", "1, 3 - 5,9", "0-0 7", "x12y 4-5"])
def test_frame_parser_matches_scanner(text):
    assert [(f.first, f.last) for f in parse_frame_ranges(text)] == recognize_frames(text)


def test_parse_error_keeps_raw_text():
    with pytest.raises(ParseError) as exc:
        parse_frame_ranges("no frames here")
    assert exc.value.raw_text == "no frames here"


def test_frames_to_time_examples():
    assert frames_to_time([FrameRange(2, 4)], fps=1).as_lists() == [[2, 5]]
    assert frames_to_time([FrameRange(0, 0)], fps=1).as_lists() == [[0, 1]]
    rs = frames_to_time([FrameRange(0, 1)], n_frames=120, video_duration_s=600, mode="uniform")
    assert rs.as_lists() == [[0, 10]]


def test_frames_to_time_conventions():
    assert frames_to_time([FrameRange(2, 4)], fps=1, coverage="instant").as_lists() == [[2, 4]]
    assert frames_to_time([FrameRange(2, 4)], fps=1, index_base=1).as_lists() == [[1, 4]]
    assert frames_to_time([FrameRange(8, 9)], fps=1, video_duration_s=9.5).as_lists() == [[8, 9.5]]


def test_frames_out_of_range():
    with pytest.raises(FrameIndexError) as exc:
        frames_to_time([FrameRange(2, 4), FrameRange(118, 121)], n_frames=120, video_duration_s=600, mode="uniform")
    assert exc.value.indices == [121]


def test_sampling_for():
    assert sampling_for(90)["mode"] == "dense"
    assert sampling_for(600) == {"mode": "uniform", "n_frames": 120, "video_duration_s": 600}


def test_timestamp_examples():
    out = parse_timestamps("00:15-00:20, 01:00-01:05", 600)
    assert out.ranges.as_lists() == [[15, 20], [60, 65]] and out.warnings == ()
    out = parse_timestamps("The event runs from 1:02:30 to 1:04:31.", 3871)
    assert out.ranges.as_lists() == [[3750, 3871]]
    with pytest.raises(ParseError):
        parse_timestamps("No relevant segment found.", 600)


def run_corpus_entry(entry):
    if entry["style"] == "frames":
        kwargs = {"mode": entry.get("mode", "dense")}
        if "fps" in entry:
            kwargs["fps"] = entry["fps"]
        if "n_frames" in entry:
            kwargs["n_frames"] = entry["n_frames"]
        return None, frames_to_time(parse_frame_ranges(entry["text"]), video_duration_s=entry.get("duration"), **kwargs)
    out = parse_timestamps(entry["text"], entry.get("duration"))
    return out.warnings, out.ranges


def test_corpus_size():
    assert len(CORPUS) >= 30


@pytest.mark.parametrize("entry", CORPUS, ids=[e["text"][:30] or "<empty>" for e in CORPUS])
def test_corpus(entry):
    if entry["expected"] is None:
        with pytest.raises(ParseError):
            run_corpus_entry(entry)
        return
    warnings, ranges = run_corpus_entry(entry)
    assert ranges.as_lists() == entry["expected"]
    if "clean" in entry:
        assert (warnings == ()) == entry["clean"], warnings


def test_parse_prediction_routes_errors_to_empty():
    out = parse_prediction("No relevant segment found.", 60)
    assert out.ranges == RangeSet() and out.warnings[0].startswith("parse error")
    out = parse_prediction("2-4", 60, style="frames", fps=1)
    assert out.ranges.as_lists() == [[2, 5]]


def _mmss(x):
    return f"{int(x) // 60:02d}:{int(x) % 60:02d}"


@given(st.lists(st.tuples(st.integers(0, 3000), st.integers(1, 300)), max_size=6))
def test_round_trip_mmss(pairs):
    rs = RangeSet.from_pairs([(s, s + d) for s, d in pairs])
    text = ", ".join(f"{_mmss(r.start_s)}-{_mmss(r.end_s)}" for r in rs)
    if not rs:
        return
    out = parse_timestamps(text, 4000)
    assert out.ranges == rs and out.warnings == ()


@given(st.lists(st.tuples(st.integers(0, 200), st.integers(0, 200)), min_size=1, max_size=5), st.floats(1, 400))
def test_clamping_never_increases_measure(pairs, duration):
    text = ", ".join(f"{a}-{a + b}" for a, b in pairs)
    free = parse_timestamps(text)
    clamped = parse_timestamps(text, duration)
    assert measure(clamped.ranges) <= measure(free.ranges)
    if any(a + b > duration for a, b in pairs):
        assert clamped.warnings


@given(st.lists(st.tuples(st.integers(0, 500), st.integers(0, 20)), min_size=1, max_size=5))
def test_frames_at_1fps_equal_shifted_seconds(pairs):
    text = ", ".join(f"{a}-{a + b}" for a, b in pairs)
    via_frames = frames_to_time(parse_frame_ranges(text), fps=1)
    shifted = ", ".join(f"{a}-{a + b + 1}" for a, b in pairs)
    assert via_frames == parse_timestamps(shifted).ranges


@given(st.text(max_size=200))
@settings(max_examples=300)
def test_parsers_never_crash_on_text(text):
    for fn in (lambda t: parse_timestamps(t, 100), parse_frame_ranges):
        try:
            fn(text)
        except ParseError:
            pass
