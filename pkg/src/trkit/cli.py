"""``trkit`` command line: one subcommand per module.

Exit codes: 0 ok, 2 schema or usage error, 3 invariant failure, 4 IO error.
Defaults can be overridden by a JSON file named in ``TRKIT_CONFIG``, keyed by
subcommand, e.g. ``{"evaluate": {"grid_n": 501}}``. Command-line flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from trkit import io
from trkit.errors import InputIOError, InvariantFailure, SchemaError, TrkitError
from trkit.metrics import AXES, curves_csv, evaluate, report
from trkit.postproc import DEFAULT_BLOCKLIST, FilterConfig, pipeline
from trkit.synthgen import ImageItem, assemble_visual, emit_tasks, splice_audio

CONFIG_ENV = "TRKIT_CONFIG"


def _bounded(cast: Callable, lo: float | None = None, hi: float | None = None, *, strict_lo: bool = False):
    def conv(text: str):
        try:
            value = cast(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid {cast.__name__}: {text!r}") from None
        if lo is not None and (value <= lo if strict_lo else value < lo):
            raise argparse.ArgumentTypeError(f"must be {'>' if strict_lo else '>='} {lo}, got {value}")
        if hi is not None and value > hi:
            raise argparse.ArgumentTypeError(f"must be <= {hi}, got {value}")
        return value

    conv.__name__ = cast.__name__
    return conv


positive_float = _bounded(float, 0, strict_lo=True)
positive_int = _bounded(int, 0, strict_lo=True)


def _csv_list(cast: Callable, choices: Sequence | None = None):
    def conv(text: str):
        items = [cast(t.strip()) for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        if choices is not None and any(i not in choices for i in items):
            raise argparse.ArgumentTypeError(f"choose from {', '.join(map(str, choices))}")
        return items

    return conv


class UsageError(TrkitError):
    exit_code = 2


# evaluate / curves ----------------------------------------------------------

def _add_prediction_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gt", required=True, help="ground-truth JSONL")
    p.add_argument("--pred", required=True, help="prediction JSONL (ranges or raw_text)")
    p.add_argument("--grid-n", type=_bounded(int, 2), default=1001, help="threshold grid size")
    _add_frame_flags(p)


def _add_frame_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", dest="answer_style", choices=("timestamps", "frames"), default="timestamps",
                   help="how raw_text answers express time")
    p.add_argument("--fps", type=positive_float, default=None, help="frame rate for dense frame indices")
    p.add_argument("--n-frames", type=positive_int, default=None, help="frame count for uniform sampling")
    p.add_argument("--mode", choices=("dense", "uniform"), default="dense")
    p.add_argument("--coverage", choices=("stride", "instant"), default="stride")
    p.add_argument("--index-base", type=int, choices=(0, 1), default=0)


def _frame_kwargs(args, have_durations: bool) -> dict:
    if args.answer_style != "frames":
        return {}
    if args.mode == "dense" and args.fps is None:
        raise UsageError("--format frames with --mode dense needs --fps")
    if args.mode == "uniform" and (args.n_frames is None or not have_durations):
        raise UsageError("--mode uniform needs --n-frames and video durations")
    return {"fps": args.fps, "n_frames": args.n_frames, "mode": args.mode,
            "coverage": args.coverage, "index_base": args.index_base}


def _scored(args):
    gt = io.load_ground_truth(args.gt)
    if not gt:
        raise SchemaError(f"{args.gt}: no ground-truth records")
    durations = {q.query_id: q.video_duration_s for q in gt}
    preds = io.load_predictions(args.pred, durations, style=args.answer_style, **_frame_kwargs(args, True))
    for qid, warns in sorted(preds.warnings.items()):
        for w in warns:
            print(f"warning: {qid}: {w}", file=sys.stderr)
    unknown = sorted(set(preds.ranges) - set(durations))
    if unknown:
        print(f"warning: {len(unknown)} prediction(s) without ground truth ignored", file=sys.stderr)
    return evaluate(gt, preds.ranges)


def cmd_evaluate(args) -> int:
    rep = report(_scored(args), grid_n=args.grid_n, axes=args.axes)
    out = Path(args.out_dir)
    io.write_text(out / "report.json", json.dumps(rep.to_dict(), sort_keys=True, indent=2) + "\n")
    io.write_text(out / "report.md", rep.to_markdown())
    io.write_text(out / "curves.csv", curves_csv(rep.curves))
    sys.stdout.write(rep.to_markdown())
    if rep.n_missing:
        print(f"warning: {rep.n_missing} query(ies) had no prediction and scored 0", file=sys.stderr)
    return 0


def cmd_curves(args) -> int:
    rep = report(_scored(args), grid_n=args.grid_n, axes=())
    _emit(args.out, curves_csv(rep.curves))
    return 0


def _emit(dest: str, text: str) -> None:
    if dest == "-":
        sys.stdout.write(text)
    else:
        io.write_text(dest, text)


# parse ----------------------------------------------------------------------

def cmd_parse(args) -> int:
    durations = None
    if args.duration_from:
        durations = {q.query_id: q.video_duration_s for q in io.load_ground_truth(args.duration_from)}
    preds = io.load_predictions(args.input, durations, style=args.answer_style,
                                **_frame_kwargs(args, durations is not None))
    for qid, warns in sorted(preds.warnings.items()):
        for w in warns:
            print(f"warning: {qid}: {w}", file=sys.stderr)
    lines = [io.dumps({"query_id": qid, "ranges": rs.as_lists()}) + "\n" for qid, rs in sorted(preds.ranges.items())]
    _emit(args.out, "".join(lines))
    return 0


# synth ----------------------------------------------------------------------

def _sample_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def _pool(args) -> list[dict]:
    if not args.captions:
        return []
    pool = []
    for lineno, obj in io.read_jsonl(args.captions):
        if "id" not in obj or "caption" not in obj:
            raise SchemaError(f"{args.captions}:{lineno}: needs id and caption")
        pool.append(obj)
    if not pool:
        raise SchemaError(f"{args.captions}: empty caption pool")
    return pool


def cmd_synth(args) -> int:
    pool = _pool(args)
    out = Path(args.out_dir)
    examples = []
    for k in range(args.n_samples):
        seed = _sample_seed(args.seed, k)
        rng = np.random.default_rng(seed)
        if pool:
            picks = [pool[(k * args.items_per_sample + j) % len(pool)] for j in range(args.items_per_sample)]
        else:
            picks = [{"id": f"s{k:04d}-{j:02d}", "caption": f"placeholder caption {k}.{j}"}
                     for j in range(args.items_per_sample)]
        if args.modality == "visual":
            items = [ImageItem(str(p["id"]), str(p["caption"]), int(p.get("width", 1920)), int(p.get("height", 1080)))
                     for p in picks]
            manifest = assemble_visual(items, seed, args.fps, segment_s=args.segment_s)
        else:
            clips = [(str(p["id"]), float(p.get("length_s", args.segment_s or int(rng.integers(5, 31)))),
                      str(p["caption"])) for p in picks]
            manifest = splice_audio(clips, seed)
        io.write_text(out / f"manifest_{k:04d}.json", manifest.to_json())
        examples.extend(e.to_json() + "\n" for e in emit_tasks(manifest))
    io.write_text(out / "examples.jsonl", "".join(examples))
    print(f"wrote {args.n_samples} manifest(s) and {len(examples)} example(s) to {out}")
    return 0


# postprocess ----------------------------------------------------------------

def cmd_postprocess(args) -> int:
    blocklist = tuple(DEFAULT_BLOCKLIST)
    if args.blocklist:
        blocklist += tuple(io.load_lines(args.blocklist))
    cfg = FilterConfig(args.gap, args.min_confidence, args.max_ranges, blocklist)
    rep = pipeline(io.load_candidates(args.input), cfg)
    out = Path(args.out_dir)
    io.write_jsonl(out / "kept.jsonl", (q.to_dict() for q in rep.kept))
    io.write_jsonl(out / "dropped.jsonl", ({**q.to_dict(), "reason": r.value} for q, r in rep.dropped))
    sys.stdout.write(rep.summary_table())
    return 0


# dattn-check ----------------------------------------------------------------

def cmd_dattn_check(args) -> int:
    from trkit.dattn.checks import run_suite

    results = run_suite(args.seeds, args.dims, args.mode, inject_fault=args.inject_fault)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {sum(r.seconds for r in results):.1f}s")
    if failed:
        names = ", ".join(r.name + (f" (seed {r.seed})" if r.seed is not None else "") for r in failed)
        raise InvariantFailure(f"invariant check failed: {names}")
    return 0


# plumbing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trkit", description="Temporal retrieval evaluation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("evaluate", help="score predictions and write report + curves")
    _add_prediction_flags(p)
    p.add_argument("--axes", type=_csv_list(str, tuple(AXES)), default=list(AXES), help="comma-separated slice axes")
    p.add_argument("--out-dir", default="trkit-report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curves", help="write accuracy-threshold curves as CSV")
    _add_prediction_flags(p)
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("parse", help="turn raw model answers into prediction JSONL")
    p.add_argument("--in", dest="input", required=True, help="JSONL with query_id and raw_text")
    p.add_argument("--out", default="-")
    p.add_argument("--duration-from", default=None, help="ground-truth JSONL supplying video durations")
    _add_frame_flags(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("synth", help="plan synthetic training manifests")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-samples", type=positive_int, default=1, help="number of manifests")
    p.add_argument("--items-per-sample", type=positive_int, default=4, help="images or clips per manifest")
    p.add_argument("--fps", type=positive_float, default=1.0)
    p.add_argument("--modality", choices=("visual", "audio"), default="visual")
    p.add_argument("--segment-s", type=positive_float, default=None, help="fixed segment length (default random)")
    p.add_argument("--captions", default=None, help="JSONL pool of {id, caption[, width, height | length_s]}")
    p.add_argument("--out-dir", default="trkit-synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("postprocess", help="filter generated query candidates")
    p.add_argument("--in", dest="input", required=True, help="JSONL with query, ranges, confidence")
    p.add_argument("--out-dir", default="trkit-postprocess")
    p.add_argument("--gap", type=_bounded(float, 0), default=0.5, help="merge gap in seconds")
    p.add_argument("--min-confidence", type=_bounded(float, 0, 1), default=0.9)
    p.add_argument("--max-ranges", type=_bounded(int, 0), default=10)
    p.add_argument("--blocklist", default=None, help="extra machine-style phrases, one per line")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("dattn-check", help="run the decomposed-attention invariant suite")
    p.add_argument("--seeds", type=positive_int, default=100)
    p.add_argument("--dims", type=_csv_list(positive_int), default=[8, 16, 32])
    p.add_argument("--mode", choices=("adaptive", "fixed"), default="adaptive")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_dattn_check)
    return parser


def _apply_config(parser: argparse.ArgumentParser, path: str) -> None:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputIOError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config {path}: malformed JSON ({exc.msg})") from None
    if not isinstance(cfg, dict):
        raise SchemaError(f"config {path}: expected an object keyed by subcommand")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, values in cfg.items():
        if name not in subparsers.choices or not isinstance(values, dict):
            raise SchemaError(f"config {path}: unknown section {name!r}")
        known = {a.dest for a in subparsers.choices[name]._actions}
        extra = sorted(set(values) - known)
        if extra:
            raise SchemaError(f"config {path}: unknown key(s) in {name}: {', '.join(extra)}")
        subparsers.choices[name].set_defaults(**values)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        if os.environ.get(CONFIG_ENV):
            _apply_config(parser, os.environ[CONFIG_ENV])
        args = parser.parse_args(argv)
        return args.func(args)
    except TrkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
