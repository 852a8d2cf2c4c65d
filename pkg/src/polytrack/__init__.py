"""Tracking-by-detection 3D multi-object tracker with multi-hypothesis association."""

from .core import (
    Box3D,
    Category,
    Detection,
    LifeCycleMode,
    MotionKind,
    OverlapMetric,
    Solver,
    TrackerConfig,
    Tracklet,
    TrackStatus,
    default_config,
    validate_config,
)
from .evaluation import GroundTruthFrame, GroundTruthObject, MetricReport, evaluate
from .pipeline import FrameInput, FrameOutput, Tracker, preprocess, run_sequence
from .synthetic import ScenarioSpec, synth_scenario

__version__ = "0.1.0"

__all__ = [
    "Box3D",
    "Category",
    "Detection",
    "FrameInput",
    "FrameOutput",
    "GroundTruthFrame",
    "GroundTruthObject",
    "LifeCycleMode",
    "MetricReport",
    "MotionKind",
    "OverlapMetric",
    "ScenarioSpec",
    "Solver",
    "Tracker",
    "TrackerConfig",
    "TrackStatus",
    "Tracklet",
    "default_config",
    "evaluate",
    "preprocess",
    "run_sequence",
    "synth_scenario",
    "validate_config",
]
