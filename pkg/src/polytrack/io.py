"""Line-delimited text formats for detections, tracks, ground truth and configs.

Every record file starts with a version header such as
``# polytrack-detections 1``. Other ``#`` lines are comments. Records are
comma-separated with numbers written to 6 decimal places.

Detections::

    frame_index,timestamp,category,x,y,z,l,w,h,yaw,vx,vy,score

A line holding only ``frame_index,timestamp`` marks a frame with no
detections. Frames skipped entirely get a linearly interpolated timestamp.

Tracks::

    frame_index,track_id,category,x,y,z,l,w,h,yaw,vx,vy,score,status

Ground truth::

    frame_index,gt_id,category,x,y,z,l,w,h,yaw,vx,vy

In both, a line holding only ``frame_index`` marks a frame with no records.

Config and scenario files use ``section.key = value`` lines. Environment
variables named ``POLYTRACK_<SECTION>__<KEY>`` override file values.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import os
from dataclasses import fields, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .core import (
    Box3D,
    Category,
    Detection,
    LifeCycleMode,
    MotionKind,
    OverlapMetric,
    Solver,
    TrackerConfig,
    TrackStatus,
    default_config,
    per_category_fields,
    require_valid,
)
from .evaluation import GroundTruthFrame, GroundTruthObject, MetricReport
from .pipeline import FrameInput, FrameOutput, TrackOutput
from .synthetic import ScenarioSpec

FORMAT_VERSION = 1
DETECTIONS_HEADER = f"# polytrack-detections {FORMAT_VERSION}"
TRACKS_HEADER = f"# polytrack-tracks {FORMAT_VERSION}"
GT_HEADER = f"# polytrack-gt {FORMAT_VERSION}"
ENV_PREFIX = "POLYTRACK_"


class FormatError(ValueError):
    """A malformed record or config line; the message carries the line number."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        super().__init__(f"line {line_no}: {message}" if line_no is not None else message)
        self.line_no = line_no


def _num(value: float) -> str:
    out = f"{value:.6f}"
    return "0.000000" if out == "-0.000000" else out


def _yaw(yaw: float) -> str:
    # round inwards at the wrap point so the written angle parses back unchanged
    r = round(yaw, 6)
    if r > math.pi:
        r = math.floor(yaw * 1e6) / 1e6
    elif r <= -math.pi:
        r = math.ceil(yaw * 1e6) / 1e6
    return _num(r)


def _box_fields(box: Box3D) -> List[str]:
    return [_num(v) for v in (*box.center, *box.size)] + [_yaw(box.yaw)] + [_num(v) for v in box.velocity]


def _float(token: str, line_no: int, name: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"{name}: not a number: {token!r}", line_no) from None
    if not math.isfinite(value):
        raise FormatError(f"{name}: must be finite, got {token!r}", line_no)
    return value


def _int(token: str, line_no: int, name: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"{name}: not an integer: {token!r}", line_no) from None


def _category(token: str, line_no: int) -> Category:
    try:
        return Category.parse(token)
    except ValueError:
        raise FormatError(f"unknown category {token.strip()!r}", line_no) from None


def _box(tokens: Sequence[str], line_no: int) -> Box3D:
    x, y, z, l, w, h, yaw, vx, vy = (_float(t, line_no, "box") for t in tokens)
    try:
        return Box3D((x, y, z), (l, w, h), yaw, (vx, vy))
    except ValueError as exc:
        raise FormatError(str(exc), line_no) from None


def _records(lines: Iterable[str], header: str) -> Iterable[Tuple[int, List[str]]]:
    """Yield (line number, fields) for each record line, checking the header."""
    kind, _, version = header[2:].partition(" ")
    seen_header = False
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            words = line[1:].split()
            if words and words[0].startswith("polytrack-"):
                if words[0] != kind:
                    raise FormatError(f"expected a {kind} file, found {words[0]}", line_no)
                if len(words) < 2 or words[1] != version:
                    raise FormatError(f"unsupported {kind} format version {words[1:]}", line_no)
                seen_header = True
            continue
        if not seen_header:
            raise FormatError(f"missing header {header!r}", line_no)
        yield line_no, [t.strip() for t in line.split(",")]


# detections


def parse_detections(stream: Iterable[str]) -> List[FrameInput]:
    """Group detection records into consecutive frames.

    Frames between the first and last index are always present, empty ones
    included, so the tracker sees every time step.
    """
    frames: Dict[int, Tuple[float, List]] = {}
    order: List[int] = []
    for line_no, tok in _records(stream, DETECTIONS_HEADER):
        if len(tok) not in (2, 13):
            raise FormatError(f"expected 2 or 13 fields, got {len(tok)}", line_no)
        fi = _int(tok[0], line_no, "frame_index")
        ts = _float(tok[1], line_no, "timestamp")
        if order and fi < order[-1]:
            raise FormatError(f"frame {fi} follows frame {order[-1]}; frames must not decrease", line_no)
        if fi in frames:
            if frames[fi][0] != ts:
                raise FormatError(f"frame {fi} has conflicting timestamps", line_no)
        else:
            frames[fi] = (ts, [])
            order.append(fi)
        if len(tok) == 2:
            continue
        cat = _category(tok[2], line_no)
        box = _box(tok[3:12], line_no)
        score = _float(tok[12], line_no, "score")
        if not 0.0 <= score <= 1.0:
            raise FormatError(f"score must lie in [0, 1], got {score}", line_no)
        frames[fi][1].append((box, score, cat))
    if not order:
        return []
    known = {fi: frames[fi][0] for fi in order}
    out = []
    for fi in range(order[0], order[-1] + 1):
        ts = known.get(fi)
        if ts is None:
            ts = _interpolate(known, order, fi)
        dets = frames.get(fi, (ts, []))[1]
        out.append(
            FrameInput(fi, ts, tuple(Detection(b, s, c, fi, i) for i, (b, s, c) in enumerate(dets)))
        )
    return out


def _interpolate(known: Mapping[int, float], order: Sequence[int], fi: int) -> float:
    lo = max(k for k in order if k < fi)
    hi = min(k for k in order if k > fi)
    return known[lo] + (known[hi] - known[lo]) * (fi - lo) / (hi - lo)


def format_detections(frames: Sequence[FrameInput]) -> str:
    lines = [DETECTIONS_HEADER]
    for fr in frames:
        head = [str(fr.frame_index), _num(fr.timestamp)]
        if not fr.detections:
            lines.append(",".join(head))
        for d in fr.detections:
            lines.append(",".join(head + [d.category.label] + _box_fields(d.box) + [_num(d.score)]))
    return "\n".join(lines) + "\n"


# tracks


def format_tracks(outputs: Sequence[FrameOutput]) -> str:
    lines = [TRACKS_HEADER]
    for fo in outputs:
        if not fo.tracks:
            lines.append(str(fo.frame_index))
        for t in sorted(fo.tracks, key=lambda t: t.track_id):
            lines.append(
                ",".join(
                    [str(fo.frame_index), str(t.track_id), t.category.label]
                    + _box_fields(t.box)
                    + [_num(t.score), t.status.value]
                )
            )
    return "\n".join(lines) + "\n"


def parse_tracks(stream: Iterable[str]) -> List[FrameOutput]:
    by_frame: Dict[int, List[TrackOutput]] = {}
    for line_no, tok in _records(stream, TRACKS_HEADER):
        if len(tok) not in (1, 14):
            raise FormatError(f"expected 1 or 14 fields, got {len(tok)}", line_no)
        fi = _int(tok[0], line_no, "frame_index")
        frame_tracks = by_frame.setdefault(fi, [])
        if len(tok) == 1:
            continue
        tid = _int(tok[1], line_no, "track_id")
        cat = _category(tok[2], line_no)
        box = _box(tok[3:12], line_no)
        score = _float(tok[12], line_no, "score")
        try:
            status = TrackStatus(tok[13].lower())
        except ValueError:
            raise FormatError(f"unknown status {tok[13]!r}", line_no) from None
        frame_tracks.append(TrackOutput(tid, box, cat, score, status))
    return [FrameOutput(fi, by_frame[fi]) for fi in sorted(by_frame)]


# ground truth


def format_ground_truth(frames: Sequence[GroundTruthFrame]) -> str:
    lines = [GT_HEADER]
    for gf in frames:
        if not gf.objects:
            lines.append(str(gf.frame_index))
        for o in gf.objects:
            lines.append(",".join([str(gf.frame_index), str(o.gt_id), o.category.label] + _box_fields(o.box)))
    return "\n".join(lines) + "\n"


def parse_ground_truth(stream: Iterable[str]) -> List[GroundTruthFrame]:
    by_frame: Dict[int, List[GroundTruthObject]] = {}
    for line_no, tok in _records(stream, GT_HEADER):
        if len(tok) not in (1, 12):
            raise FormatError(f"expected 1 or 12 fields, got {len(tok)}", line_no)
        fi = _int(tok[0], line_no, "frame_index")
        frame_objects = by_frame.setdefault(fi, [])
        if len(tok) == 1:
            continue
        gid = _int(tok[1], line_no, "gt_id")
        frame_objects.append(GroundTruthObject(gid, _box(tok[3:12], line_no), _category(tok[2], line_no)))
    out = []
    for fi in sorted(by_frame):
        try:
            out.append(GroundTruthFrame(fi, tuple(by_frame[fi])))
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    return out


# key = value files


def parse_key_values(stream: Iterable[str]) -> Dict[Tuple[str, str], str]:
    """Read ``section.key = value`` lines into {(section, key): raw value}."""
    out: Dict[Tuple[str, str], str] = {}
    for line_no, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, eq, value = line.partition("=")
        section, dot, key = name.strip().partition(".")
        if not eq or not dot or not section or not key.strip() or not value.strip():
            raise FormatError(f"expected 'section.key = value', got {raw.strip()!r}", line_no)
        out[(section.strip().lower(), key.strip().lower())] = value.strip()
    return out


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[Tuple[str, str], str]:
    """Collect ``POLYTRACK_SECTION__KEY=value`` variables."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        section, sep, key = name[len(ENV_PREFIX):].partition("__")
        if sep and section and key:
            out[(section.lower(), key.lower())] = value.strip()
    return out


_ENUM_BY_FIELD = {
    "solver": Solver,
    "life_cycle_mode": LifeCycleMode,
    "motion_model": MotionKind,
    "nms_metric": OverlapMetric,
}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(name: str, kind, raw: str):
    enum_type = _ENUM_BY_FIELD.get(name)
    if enum_type is not None:
        return _parse_enum(enum_type, raw, name)
    if kind is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ValueError(f"{name}: expected {kind.__name__}, got {raw!r}") from None


def _parse_enum(enum_type, raw: str, name: str):
    key = raw.strip().lower().replace("-", "_")
    for member in enum_type:
        if key in (member.value.lower(), member.name.lower()):
            return member
    choices = ", ".join(m.value for m in enum_type)
    raise ValueError(f"{name}: unknown value {raw!r} (choose from {choices})")


_SCALAR_TYPES = {"int": int, "float": float, "bool": bool}


def _scalar_type(f: dataclasses.Field):
    if f.name in _ENUM_BY_FIELD:
        return None
    ann = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
    return _SCALAR_TYPES.get(ann)


def apply_config_entries(cfg: TrackerConfig, entries: Mapping[Tuple[str, str], str]) -> TrackerConfig:
    """Apply parsed entries.

    Section ``tracker`` sets scalar fields (``tracker.max_age = 30``); a
    per-category field name as section sets one category
    (``sf_threshold.car = 0.2``).
    """
    by_name = {f.name: f for f in fields(TrackerConfig)}
    per_cat = set(per_category_fields())
    changes: Dict[str, object] = {}
    tables: Dict[str, dict] = {}
    for (section, key), raw in entries.items():
        if section == "tracker":
            f = by_name.get(key)
            if f is None or key in per_cat:
                raise ValueError(f"unknown tracker setting {key!r}")
            kind = _scalar_type(f)
            changes[key] = _convert(key, kind, raw)
        elif section in per_cat:
            try:
                cat = Category.parse(key)
            except ValueError:
                raise ValueError(f"{section}: unknown category {key!r}") from None
            table = tables.setdefault(section, dict(getattr(cfg, section)))
            table[cat] = _convert(section, float, raw)
        else:
            raise ValueError(f"unknown config section {section!r}")
    changes.update(tables)
    return require_valid(replace(cfg, **changes))


def load_config(path: Optional[str] = None, environ: Optional[Mapping[str, str]] = None) -> TrackerConfig:
    entries: Dict[Tuple[str, str], str] = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            entries.update(parse_key_values(fh))
    entries.update(env_overrides(environ))
    return apply_config_entries(default_config(), entries)


def format_config(cfg: TrackerConfig) -> str:
    lines = []
    per_cat = set(per_category_fields())
    for f in fields(TrackerConfig):
        value = getattr(cfg, f.name)
        if f.name in per_cat:
            for cat in Category:
                lines.append(f"{f.name}.{cat.label} = {_config_value(value[cat])}")
        else:
            lines.append(f"tracker.{f.name} = {_config_value(value)}")
    return "\n".join(lines) + "\n"


def _config_value(value) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def load_scenario(path: Optional[str] = None, seed: Optional[int] = None) -> ScenarioSpec:
    """Read ``scenario.<field> = value`` lines into a ScenarioSpec."""
    entries: Dict[Tuple[str, str], str] = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            entries = parse_key_values(fh)
    by_name = {f.name: f for f in fields(ScenarioSpec)}
    changes: Dict[str, object] = {}
    for (section, key), raw in entries.items():
        if section != "scenario" or key not in by_name:
            raise ValueError(f"unknown scenario setting {section}.{key}")
        if key == "motion":
            changes[key] = raw
        elif key == "categories":
            changes[key] = tuple(c.strip() for c in raw.split(",") if c.strip())
            for c in changes[key]:
                Category.parse(c)
        else:
            changes[key] = _convert(key, _SCALAR_TYPES[by_name[key].type], raw)
    if seed is not None:
        changes["seed"] = seed
    return ScenarioSpec(**changes)


# metric reports

_REPORT_COLUMNS = ("amota", "amotp", "samota", "mota", "motp", "recall", "ids", "fp", "fn", "mota_best", "ids_best")


def format_report(report: MetricReport) -> str:
    """Fixed-width text table, one row per category plus the aggregate."""
    header = f"{'category':<12}" + "".join(f"{c:>10}" for c in _REPORT_COLUMNS)
    rows = [header]
    items = [(c.label, m) for c, m in report.per_category.items()] + [("overall", report.aggregate)]
    for label, m in items:
        cells = []
        for col in _REPORT_COLUMNS:
            v = getattr(m, col)
            cells.append(f"{v:>10d}" if isinstance(v, int) else f"{v:>10.4f}")
        rows.append(f"{label:<12}" + "".join(cells))
    rows.append(f"match distance: {report.dist_threshold:g} m")
    return "\n".join(rows) + "\n"


def report_json(report: MetricReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def read_lines(path: str) -> List[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.readlines()


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
