"""Shared domain types: categories, boxes, detections, tracklets and tracker config."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Tuple

import numpy as np


class Category(enum.IntEnum):
    CAR = 0
    BICYCLE = 1
    MOTORCYCLE = 2
    PEDESTRIAN = 3
    BUS = 4
    TRAILER = 5
    TRUCK = 6

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, token: str) -> "Category":
        """Accept full names ("car") or the short tags used in tables ("ped", "tru")."""
        key = token.strip().lower()
        try:
            return _CATEGORY_ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown category {token!r}") from None


_CATEGORY_ALIASES = {c.label: c for c in Category}
_CATEGORY_ALIASES.update(
    {
        "bic": Category.BICYCLE,
        "moto": Category.MOTORCYCLE,
        "ped": Category.PEDESTRIAN,
        "tra": Category.TRAILER,
        "tru": Category.TRUCK,
    }
)

N_CATEGORIES = len(Category)


def index_of(category: Category) -> int:
    return int(category)


def name_of(index: int) -> Category:
    return Category(index)


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class Box3D:
    """Oriented cuboid rotated about the vertical axis, with planar velocity."""

    center: Tuple[float, float, float]
    size: Tuple[float, float, float]  # length, width, height
    yaw: float = 0.0
    velocity: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        center = tuple(float(v) for v in self.center)
        size = tuple(float(v) for v in self.size)
        velocity = tuple(float(v) for v in self.velocity)
        if len(center) != 3 or len(size) != 3 or len(velocity) != 2:
            raise ValueError("Box3D expects center (3), size (3) and velocity (2)")
        values = center + size + velocity + (float(self.yaw),)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"non-finite Box3D component in {values}")
        if min(size) <= 0.0:
            raise ValueError(f"box dimensions must be positive, got {size}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "velocity", velocity)
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    @property
    def x(self) -> float:
        return self.center[0]

    @property
    def y(self) -> float:
        return self.center[1]

    @property
    def z(self) -> float:
        return self.center[2]

    @property
    def length(self) -> float:
        return self.size[0]

    @property
    def width(self) -> float:
        return self.size[1]

    @property
    def height(self) -> float:
        return self.size[2]

    @property
    def volume(self) -> float:
        return self.size[0] * self.size[1] * self.size[2]


@dataclass(frozen=True)
class Detection:
    box: Box3D
    score: float
    category: Category
    frame_index: int = 0
    detection_id: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must lie in [0, 1], got {self.score}")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    TERMINATED = "terminated"


class Solver(enum.Enum):
    HUNGARIAN = "hungarian"
    GREEDY = "greedy"
    MNN = "mnn"
    DTO = "dto"


class MotionKind(enum.Enum):
    CV = "cv"
    CTRA = "ctra"
    BICYCLE = "bicycle"


class LifeCycleMode(enum.Enum):
    COUNT_MAX_AGE = "count_max_age"
    CONFIDENCE_LATEST = "confidence_latest"
    CONFIDENCE_AVERAGE = "confidence_average"
    CONFIDENCE_COUNT_MIXED = "confidence_count_mixed"


class OverlapMetric(enum.Enum):
    IOU_BEV = "iou_bev"
    IOU_3D = "iou_3d"


@dataclass
class Tracklet:
    """A persistent identity. Mutated only by the tracking pipeline."""

    track_id: int
    category: Category
    filter_state: "object"  # motion.FilterState
    motion: "object"  # motion.MotionModel
    score_avg: float
    score_latest: float
    hits: int = 1
    misses: int = 0
    age: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE
    size_history: List[Tuple[float, float, float]] = field(default_factory=list)
    time_invariant: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    birth_frame: int = 0

    @property
    def state_vector(self) -> np.ndarray:
        return self.filter_state.x

    @property
    def covariance(self) -> np.ndarray:
        return self.filter_state.P

    @property
    def is_alive(self) -> bool:
        return self.status is not TrackStatus.TERMINATED

    @property
    def box(self) -> Box3D:
        """Current box estimate built from the filter state and the smoothed size."""
        return self.motion.to_box(self.filter_state.x, self.time_invariant)


def _per_category(default: float, **overrides: float) -> Dict[Category, float]:
    table = {c: default for c in Category}
    for key, value in overrides.items():
        table[Category.parse(key)] = value
    return table


def _default_motion_models() -> Dict[Category, MotionKind]:
    table = {c: MotionKind.CTRA for c in Category}
    table[Category.BICYCLE] = MotionKind.BICYCLE
    table[Category.MOTORCYCLE] = MotionKind.BICYCLE
    return table


@dataclass(frozen=True)
class TrackerConfig:
    sf_threshold: Dict[Category, float]
    nms_threshold: Dict[Category, float]
    assoc_threshold: Dict[Category, float]
    decay_rate: Dict[Category, float]
    delete_threshold: Dict[Category, float]
    motion_model: Dict[Category, MotionKind]
    nms_metric: Dict[Category, OverlapMetric]
    nms_scale: Dict[Category, float]
    max_age: int = 20
    ewma_alpha: float = 0.2
    voxel_size: float = 5.0
    mht_prune_alpha: float = 0.01
    mht_top_k: int = 3
    wheelbase_ratio: float = 0.6
    rear_tire_ratio: float = 0.3
    solver: Solver = Solver.DTO
    adaptive_noise: bool = True
    confidence_weighting: bool = True
    min_hits_to_confirm: int = 2
    life_cycle_mode: LifeCycleMode = LifeCycleMode.CONFIDENCE_COUNT_MIXED
    # second association stage (tentative tracks): center distance / scale, gated
    stage2_distance_scale: float = 10.0
    stage2_gate: float = 1.0
    # filter initialisation
    init_pos_var: float = 1.0
    init_yaw_var: float = 0.1
    init_speed_var: float = 10.0
    init_accel_var: float = 1.0
    init_turn_var: float = 0.1
    process_noise: float = 0.1
    # height, acceleration, yaw and turn-rate/steer channels
    process_noise_rates: float = 0.01
    measurement_noise: float = 0.1
    # adapted R and Q stay within these multiples of their initial values
    noise_scale_min: float = 0.5
    noise_scale_max: float = 10.0
    median_window: int = 5
    default_dt: float = 0.5
    output_confirmed_only: bool = True


def default_config() -> TrackerConfig:
    """Per-category thresholds tuned for nuScenes."""
    return TrackerConfig(
        sf_threshold=_per_category(
            0.0, bic=0.15, car=0.16, moto=0.16, bus=0.12, tra=0.13, tru=0.0, ped=0.13
        ),
        nms_threshold=_per_category(0.08),
        assoc_threshold=_per_category(
            1.2, bic=1.6, moto=1.6, bus=1.6, car=1.2, tru=1.2, tra=1.16, ped=1.78
        ),
        decay_rate=_per_category(
            0.24, ped=0.18, car=0.26, tru=0.28, moto=0.28, tra=0.22, bic=0.24, bus=0.24
        ),
        delete_threshold=_per_category(0.04, bus=0.08, ped=0.1),
        motion_model=_default_motion_models(),
        nms_metric={c: OverlapMetric.IOU_BEV for c in Category},
        nms_scale=_per_category(1.0),
    )


_PER_CATEGORY_FLOAT_FIELDS = (
    "sf_threshold",
    "nms_threshold",
    "assoc_threshold",
    "decay_rate",
    "delete_threshold",
    "nms_scale",
)

_NON_NEGATIVE_SCALARS = (
    "voxel_size",
    "mht_prune_alpha",
    "wheelbase_ratio",
    "rear_tire_ratio",
    "stage2_distance_scale",
    "stage2_gate",
    "init_pos_var",
    "init_yaw_var",
    "init_speed_var",
    "init_accel_var",
    "init_turn_var",
    "process_noise",
    "process_noise_rates",
    "measurement_noise",
    "noise_scale_min",
    "noise_scale_max",
    "default_dt",
)


def validate_config(cfg: TrackerConfig) -> List[str]:
    """Return one message per violated bound; an empty list means the config is usable."""
    errors: List[str] = []
    for name in _PER_CATEGORY_FLOAT_FIELDS:
        table = getattr(cfg, name)
        missing = [c.label for c in Category if c not in table]
        if missing:
            errors.append(f"{name}: missing categories {missing}")
        for cat, value in table.items():
            if not (math.isfinite(value) and value >= 0.0):
                errors.append(f"{name}.{cat.label}: must be finite and >= 0, got {value}")
    for name in ("motion_model", "nms_metric"):
        missing = [c.label for c in Category if c not in getattr(cfg, name)]
        if missing:
            errors.append(f"{name}: missing categories {missing}")
    for name in _NON_NEGATIVE_SCALARS:
        value = getattr(cfg, name)
        if not (math.isfinite(value) and value >= 0.0):
            errors.append(f"{name}: must be finite and >= 0, got {value}")
    if not (0.0 < cfg.ewma_alpha < 1.0):
        errors.append(f"ewma_alpha: must lie in (0, 1), got {cfg.ewma_alpha}")
    if cfg.max_age < 1:
        errors.append(f"max_age: must be >= 1, got {cfg.max_age}")
    if cfg.voxel_size <= 0.0:
        errors.append(f"voxel_size: must be > 0, got {cfg.voxel_size}")
    if cfg.mht_top_k < 1:
        errors.append(f"mht_top_k: must be a positive integer, got {cfg.mht_top_k}")
    if cfg.min_hits_to_confirm < 1:
        errors.append(f"min_hits_to_confirm: must be >= 1, got {cfg.min_hits_to_confirm}")
    if cfg.median_window < 1 or cfg.median_window % 2 == 0:
        errors.append(f"median_window: must be odd and >= 1, got {cfg.median_window}")
    if not cfg.noise_scale_min <= 1.0 <= cfg.noise_scale_max:
        errors.append(
            f"noise_scale_min/noise_scale_max: need min <= 1 <= max, got {cfg.noise_scale_min}, {cfg.noise_scale_max}"
        )
    if cfg.default_dt <= 0.0:
        errors.append(f"default_dt: must be > 0, got {cfg.default_dt}")
    return errors


def config_field_names() -> List[str]:
    return [f.name for f in fields(TrackerConfig)]


def per_category_fields() -> Tuple[str, ...]:
    return _PER_CATEGORY_FLOAT_FIELDS + ("motion_model", "nms_metric")


def require_valid(cfg: TrackerConfig) -> TrackerConfig:
    errors = validate_config(cfg)
    if errors:
        raise ValueError("invalid tracker config: " + "; ".join(errors))
    return cfg

