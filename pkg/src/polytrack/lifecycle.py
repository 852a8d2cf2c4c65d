"""Tracklet birth, confirmation, score refinement and termination."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import Detection, LifeCycleMode, TrackerConfig, TrackStatus, Tracklet
from .motion import MotionModel


class EventKind(enum.Enum):
    BORN = "born"
    CONFIRMED = "confirmed"
    TERMINATED = "terminated"
    PENALIZED = "penalized"
    REFRESHED = "refreshed"


@dataclass(frozen=True)
class LifecycleEvent:
    kind: EventKind
    track_id: int
    frame_index: int
    score_after: float


def ewma(previous: float, observation: float, alpha: float) -> float:
    return alpha * observation + (1.0 - alpha) * previous


def on_match(t: Tracklet, det_score: float, cfg: TrackerConfig) -> Tracklet:
    if t.status is TrackStatus.TERMINATED:
        raise ValueError(f"track {t.track_id} is terminated")
    t.misses = 0
    t.hits += 1
    t.score_latest = det_score
    t.score_avg = ewma(t.score_avg, det_score, cfg.ewma_alpha)
    if t.status is TrackStatus.TENTATIVE and t.hits >= cfg.min_hits_to_confirm:
        t.status = TrackStatus.CONFIRMED
    return t


def on_miss(t: Tracklet, cfg: TrackerConfig) -> Tracklet:
    """Decay the latest score; the decayed value also feeds the running average."""
    if t.status is TrackStatus.TERMINATED:
        raise ValueError(f"track {t.track_id} is terminated")
    t.misses += 1
    t.score_latest = max(0.0, t.score_latest - cfg.decay_rate[t.category])
    t.score_avg = ewma(t.score_avg, t.score_latest, cfg.ewma_alpha)
    return t


def should_terminate(t: Tracklet, cfg: TrackerConfig) -> bool:
    # confirmation needs consecutive hits, so a tentative track dies on its first miss
    if t.status is TrackStatus.TENTATIVE and t.misses > 0:
        return True
    mode = cfg.life_cycle_mode
    delete = cfg.delete_threshold[t.category]
    if mode is LifeCycleMode.COUNT_MAX_AGE:
        return t.misses > cfg.max_age
    if mode is LifeCycleMode.CONFIDENCE_LATEST:
        return t.score_latest < delete
    if mode is LifeCycleMode.CONFIDENCE_AVERAGE:
        return t.score_avg < delete
    return t.score_avg < delete or t.misses > cfg.max_age


def spawn(det: Detection, next_id: int, cfg: TrackerConfig, dt: float | None = None) -> Tracklet:
    model = MotionModel(
        cfg.motion_model[det.category],
        wheelbase_ratio=cfg.wheelbase_ratio,
        rear_tire_ratio=cfg.rear_tire_ratio,
        length=det.box.length,
    )
    t = Tracklet(
        track_id=next_id,
        category=det.category,
        filter_state=model.initial_state(det.box, cfg, dt),
        motion=model,
        score_avg=det.score,
        score_latest=det.score,
        hits=1,
        misses=0,
        age=0,
        status=TrackStatus.TENTATIVE,
        size_history=[det.box.size],
        time_invariant=det.box.size,
        birth_frame=det.frame_index,
    )
    if t.hits >= cfg.min_hits_to_confirm:
        t.status = TrackStatus.CONFIRMED
    return t
