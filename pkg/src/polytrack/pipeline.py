"""Frame-by-frame tracking: pre-process, predict, associate, update, life-cycle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .association import two_stage_associate
from .core import Box3D, Category, Detection, TrackerConfig, TrackStatus, Tracklet, require_valid
from .geometry import NmsStats, nms
from .lifecycle import EventKind, LifecycleEvent, on_match, on_miss, should_terminate, spawn
from .motion import adapt_Q, adapt_R, bound_scale, innovation, measurement_from_box, median_smooth, predict, update

STAGES = ("preprocess", "predict", "associate", "update", "lifecycle")


class SequenceError(ValueError):
    """Frames out of order or otherwise unusable as a sequence."""


@dataclass(frozen=True)
class FrameInput:
    frame_index: int
    timestamp: float
    detections: Tuple[Detection, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        for det in self.detections:
            if det.frame_index != self.frame_index:
                raise SequenceError(
                    f"detection {det.detection_id} carries frame {det.frame_index}, expected {self.frame_index}"
                )


@dataclass(frozen=True)
class TrackOutput:
    track_id: int
    box: Box3D
    category: Category
    score: float
    status: TrackStatus


@dataclass
class FrameOutput:
    frame_index: int
    tracks: List[TrackOutput]
    timing: Dict[str, float] = field(default_factory=dict)  # microseconds per stage


@dataclass
class RunSummary:
    frames: int
    total_seconds: float
    stage_us: Dict[str, float]

    @property
    def fps(self) -> float:
        return self.frames / self.total_seconds if self.total_seconds > 0 else float("inf")


def preprocess(
    dets: Sequence[Detection],
    cfg: TrackerConfig,
    stats: Optional[NmsStats] = None,
    score_filter: bool = True,
) -> List[Detection]:
    """Per category: drop low scores, then suppress duplicates.

    ``score_filter=False`` runs NMS alone, which is only useful for comparing
    the cost of the two orders.
    """
    by_cat: Dict[Category, List[Detection]] = {}
    for det in dets:
        if score_filter and det.score < cfg.sf_threshold[det.category]:
            continue
        by_cat.setdefault(det.category, []).append(det)
    kept: List[Detection] = []
    for cat in sorted(by_cat):
        kept += nms(
            by_cat[cat],
            cfg.nms_threshold[cat],
            cfg.nms_metric[cat],
            voxel_size=cfg.voxel_size,
            stats=stats,
            scale=cfg.nms_scale[cat],
        )
    return kept


class Tracker:
    """Owns the live tracklets of one sequence."""

    def __init__(self, cfg: TrackerConfig):
        self.cfg = require_valid(cfg)
        self.tracks: List[Tracklet] = []
        self.archive: List[Tracklet] = []
        self.events: List[LifecycleEvent] = []
        self.next_id = 1
        self.last_timestamp: Optional[float] = None
        self.last_frame: Optional[int] = None
        self._nominal_noise: Dict = {}

    def _log(self, kind: EventKind, t: Tracklet, frame_index: int) -> None:
        self.events.append(LifecycleEvent(kind, t.track_id, frame_index, t.score_avg))

    def step(self, frame: FrameInput) -> FrameOutput:
        cfg = self.cfg
        if self.last_timestamp is not None:
            if frame.timestamp <= self.last_timestamp:
                raise SequenceError(
                    f"timestamp {frame.timestamp} does not follow {self.last_timestamp}"
                )
            dt = frame.timestamp - self.last_timestamp
        else:
            dt = cfg.default_dt
        timing = {}
        clock = time.perf_counter_ns

        t0 = clock()
        dets = preprocess(frame.detections, cfg)
        t1 = clock()

        for trk in self.tracks:
            fs = replace(trk.filter_state, dt=dt)
            trk.filter_state = predict(fs, trk.motion)
            trk.age += 1
        t2 = clock()

        result = two_stage_associate(dets, self.tracks, cfg)
        t3 = clock()

        for i, j in result.matched:
            det, trk = dets[i], self.tracks[j]
            fs = trk.filter_state
            z = measurement_from_box(det.box)
            if cfg.adaptive_noise:
                kind = trk.motion.kind
                if kind not in self._nominal_noise:
                    self._nominal_noise[kind] = trk.motion.nominal_noise(cfg)
                Q0, R0 = self._nominal_noise[kind]
                R = adapt_R(fs.R, innovation(fs, z))
                fs = replace(fs, R=bound_scale(R, R0, cfg.noise_scale_min, cfg.noise_scale_max))
            fs = update(fs, z, det.score, weighted=cfg.confidence_weighting)
            if cfg.adaptive_noise:
                Q = adapt_Q(fs.Q, trk.motion.planar_velocity(fs.x))
                fs = replace(fs, Q=bound_scale(Q, Q0, cfg.noise_scale_min, cfg.noise_scale_max))
            trk.filter_state = fs
            trk.size_history = (trk.size_history + [det.box.size])[-cfg.median_window:]
            trk.time_invariant = median_smooth(trk.size_history, cfg.median_window)
            trk.motion = trk.motion.with_length(trk.time_invariant[0])
        t4 = clock()

        fi = frame.frame_index
        for i, j in result.matched:
            trk = self.tracks[j]
            was = trk.status
            on_match(trk, dets[i].score, cfg)
            self._log(EventKind.REFRESHED, trk, fi)
            if was is TrackStatus.TENTATIVE and trk.status is TrackStatus.CONFIRMED:
                self._log(EventKind.CONFIRMED, trk, fi)
        for j in result.unmatched_tracks:
            trk = self.tracks[j]
            on_miss(trk, cfg)
            self._log(EventKind.PENALIZED, trk, fi)
            if should_terminate(trk, cfg):
                trk.status = TrackStatus.TERMINATED
                self._log(EventKind.TERMINATED, trk, fi)
        self.archive += [t for t in self.tracks if not t.is_alive]
        self.tracks = [t for t in self.tracks if t.is_alive]
        for i in result.unmatched_dets:
            trk = spawn(dets[i], self.next_id, cfg, dt)
            self.next_id += 1
            self.tracks.append(trk)
            self._log(EventKind.BORN, trk, fi)
            if trk.status is TrackStatus.CONFIRMED:
                self._log(EventKind.CONFIRMED, trk, fi)
        t5 = clock()

        for name, a, b in zip(STAGES, (t0, t1, t2, t3, t4), (t1, t2, t3, t4, t5)):
            timing[name] = (b - a) / 1e3
        self.last_timestamp = frame.timestamp
        self.last_frame = fi
        return FrameOutput(fi, self.emit(), timing)

    def emit(self) -> List[TrackOutput]:
        out = []
        for trk in self.tracks:
            if self.cfg.output_confirmed_only and trk.status is not TrackStatus.CONFIRMED:
                continue
            out.append(TrackOutput(trk.track_id, trk.box, trk.category, trk.score_avg, trk.status))
        return out


class TrackingError(RuntimeError):
    def __init__(self, frame_index: int, cause: Exception):
        super().__init__(f"frame {frame_index}: {cause}")
        self.frame_index = frame_index


def run_sequence(
    frames: Sequence[FrameInput], cfg: TrackerConfig
) -> Tuple[List[FrameOutput], RunSummary]:
    if not frames:
        raise SequenceError("empty frame sequence")
    tracker = Tracker(cfg)
    outputs = []
    for frame in frames:
        try:
            outputs.append(tracker.step(frame))
        except (SequenceError, ArithmeticError, ValueError) as exc:
            raise TrackingError(frame.frame_index, exc) from exc
    stage_us = {s: sum(o.timing[s] for o in outputs) for s in STAGES}
    total = sum(stage_us.values()) / 1e6
    return outputs, RunSummary(len(outputs), total, stage_us)
