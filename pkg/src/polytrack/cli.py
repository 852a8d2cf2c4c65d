"""Command-line entry point: ``polytrack track|eval|synth|bench|ablate``."""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

from .core import LifeCycleMode, Solver, TrackerConfig
from .evaluation import evaluate
from .io import (
    format_detections,
    format_ground_truth,
    format_report,
    format_tracks,
    load_config,
    load_scenario,
    parse_detections,
    parse_ground_truth,
    parse_tracks,
    read_lines,
    report_json,
    write_text,
)
from .pipeline import STAGES, run_sequence
from .synthetic import synth_scenario

SOLVER_ROWS = (
    ("MNN", Solver.MNN),
    ("Greedy", Solver.GREEDY),
    ("Hungarian", Solver.HUNGARIAN),
    ("DTO", Solver.DTO),
)
LIFECYCLE_ROWS = (
    ("Count & Max-age", LifeCycleMode.COUNT_MAX_AGE),
    ("Confidence & Latest", LifeCycleMode.CONFIDENCE_LATEST),
    ("Confidence & Average", LifeCycleMode.CONFIDENCE_AVERAGE),
    ("Confidence & Count", LifeCycleMode.CONFIDENCE_COUNT_MIXED),
)
NOISE_ROWS = (
    ("fixed noise, unweighted", False, False),
    ("fixed noise, weighted", False, True),
    ("adaptive noise, unweighted", True, False),
    ("adaptive noise, weighted", True, True),
)
AXIS_COLUMNS = {
    "solver": ("MOTA", "AMOTA", "AMOTP", "IDS", "FN"),
    "lifecycle": ("AMOTA", "MOTA", "FPS", "FN"),
    "noise": ("AMOTA", "MOTA", "IDS", "FP", "FN"),
}


class CliError(Exception):
    pass


def _config(path: Optional[str]) -> TrackerConfig:
    try:
        return load_config(path)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}") from None
    except ValueError as exc:
        raise CliError(f"bad config: {exc}") from None


def _detections(path: str):
    try:
        frames = parse_detections(read_lines(path))
    except OSError as exc:
        raise CliError(f"cannot read detections: {exc}") from None
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None
    if not frames:
        raise CliError(f"{path}: no frames")
    return frames


def _ground_truth(path: str):
    try:
        return parse_ground_truth(read_lines(path))
    except OSError as exc:
        raise CliError(f"cannot read ground truth: {exc}") from None
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None


def _summary_text(summary) -> str:
    lines = [f"frames: {summary.frames}", f"fps: {summary.fps:.1f}"]
    for stage in STAGES:
        lines.append(f"{stage}_ms: {summary.stage_us[stage] / 1e3:.3f}")
    return "\n".join(lines) + "\n"


def cmd_track(args) -> int:
    cfg = _config(args.config)
    if args.solver:
        cfg = replace(cfg, solver=Solver(args.solver))
    if args.no_adaptive_noise:
        cfg = replace(cfg, adaptive_noise=False)
    if args.no_confidence_weighting:
        cfg = replace(cfg, confidence_weighting=False)
    if args.lifecycle:
        cfg = replace(cfg, life_cycle_mode=LifeCycleMode(args.lifecycle))
    frames = _detections(args.detections)
    outputs, summary = run_sequence(frames, cfg)
    write_text(args.out, format_tracks(outputs))
    sys.stdout.write(_summary_text(summary))
    return 0


def cmd_eval(args) -> int:
    gt = _ground_truth(args.gt)
    try:
        tracks = parse_tracks(read_lines(args.tracks))
    except OSError as exc:
        raise CliError(f"cannot read tracks: {exc}") from None
    except ValueError as exc:
        raise CliError(f"{args.tracks}: {exc}") from None
    try:
        report = evaluate(gt, tracks, dist_threshold=args.dist_threshold)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    text = format_report(report)
    write_text(args.out, text)
    write_text(args.json or args.out + ".json", report_json(report))
    sys.stdout.write(text)
    return 0


def cmd_synth(args) -> int:
    try:
        spec = load_scenario(args.spec, args.seed)
    except OSError as exc:
        raise CliError(f"cannot read scenario: {exc}") from None
    except ValueError as exc:
        raise CliError(f"bad scenario: {exc}") from None
    frames, gt = synth_scenario(spec)
    write_text(args.out_dets, format_detections(frames))
    write_text(args.out_gt, format_ground_truth(gt))
    return 0


def cmd_bench(args) -> int:
    if args.repeat < 1:
        raise CliError("--repeat must be >= 1")
    cfg = _config(args.config)
    frames = _detections(args.detections)
    fps, stages = [], {s: [] for s in STAGES}
    for _ in range(args.repeat):
        _, summary = run_sequence(frames, cfg)
        fps.append(summary.fps)
        for s in STAGES:
            stages[s].append(summary.stage_us[s] / summary.frames)
    print(f"frames: {len(frames)}  repeats: {args.repeat}")
    print(f"median fps: {statistics.median(fps):.1f}")
    for s in STAGES:
        print(f"  {s:<11} {statistics.median(stages[s]):10.1f} us/frame")
    return 0


def _ablation_configs(axis: str, base: TrackerConfig) -> List[Tuple[str, TrackerConfig]]:
    if axis == "solver":
        return [(name, replace(base, solver=s)) for name, s in SOLVER_ROWS]
    if axis == "lifecycle":
        return [(name, replace(base, life_cycle_mode=m)) for name, m in LIFECYCLE_ROWS]
    return [
        (name, replace(base, adaptive_noise=a, confidence_weighting=w)) for name, a, w in NOISE_ROWS
    ]


def _ablation_row(job) -> dict:
    cfg, frames, gt = job
    t0 = time.perf_counter()
    outputs, _ = run_sequence(frames, cfg)
    elapsed = time.perf_counter() - t0
    m = evaluate(gt, outputs).aggregate
    return {
        "MOTA": m.mota,
        "AMOTA": m.amota,
        "AMOTP": m.amotp,
        "IDS": m.ids,
        "FP": m.fp,
        "FN": m.fn,
        "FPS": len(frames) / elapsed if elapsed > 0 else float("inf"),
    }


def run_ablation(axis: str, frames, gt, base: TrackerConfig, jobs: int = 1) -> List[Tuple[str, dict]]:
    """One aggregate metric row per setting of ``axis``."""
    configs = _ablation_configs(axis, base)
    work = [(cfg, frames, gt) for _, cfg in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_ablation_row, work))
    else:
        rows = [_ablation_row(w) for w in work]
    return [(name, row) for (name, _), row in zip(configs, rows)]


def format_ablation(axis: str, rows: Sequence[Tuple[str, dict]]) -> str:
    cols = AXIS_COLUMNS[axis]
    width = max(len(name) for name, _ in rows) + 2
    out = [f"{'Method':<{width}}" + "".join(f"{c:>9}" for c in cols)]
    for name, row in rows:
        cells = []
        for c in cols:
            v = row[c]
            if c in ("IDS", "FP", "FN"):
                cells.append(f"{v:>9d}")
            elif c == "FPS":
                cells.append(f"{v:>9.1f}")
            elif c == "AMOTP":
                cells.append(f"{v:>9.3f}")
            else:
                cells.append(f"{100 * v:>9.1f}")
        out.append(f"{name:<{width}}" + "".join(cells))
    return "\n".join(out) + "\n"


def cmd_ablate(args) -> int:
    if args.jobs < 1:
        raise CliError("--jobs must be >= 1")
    cfg = _config(args.config)
    frames = _detections(args.detections)
    gt = _ground_truth(args.gt)
    rows = run_ablation(args.axis, frames, gt, cfg, args.jobs)
    text = format_ablation(args.axis, rows)
    if args.out:
        write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polytrack", description="3D multi-object tracking by detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track a detection file")
    p.add_argument("--detections", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--solver", choices=[s.value for s in Solver])
    p.add_argument("--no-adaptive-noise", action="store_true")
    p.add_argument("--no-confidence-weighting", action="store_true")
    p.add_argument("--lifecycle", choices=[m.value for m in LifeCycleMode])
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score tracks against ground truth")
    p.add_argument("--tracks", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True, help="text table; JSON goes to OUT.json unless --json is given")
    p.add_argument("--json")
    p.add_argument("--dist-threshold", type=float, default=2.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dets", required=True)
    p.add_argument("--out-gt", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time repeated tracking runs")
    p.add_argument("--detections", required=True)
    p.add_argument("--config")
    p.add_argument("--repeat", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="compare settings along one axis")
    p.add_argument("--gt", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--axis", required=True, choices=sorted(AXIS_COLUMNS))
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"polytrack: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"polytrack: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
