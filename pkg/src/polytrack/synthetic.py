"""Seeded synthetic scenes with known ground truth.

Objects drive along parallel lanes in alternating directions so that
neighbours pass each other around the middle of the sequence ("linear"), or
additionally follow a constant turn rate ("turning"). Detections are the
ground-truth boxes plus Gaussian noise, randomly dropped, with uniform clutter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core import Box3D, Category, Detection
from .evaluation import GroundTruthFrame, GroundTruthObject
from .pipeline import FrameInput

# (length, width, height), roughly nuScenes class means
TYPICAL_SIZE = {
    Category.CAR: (4.6, 1.9, 1.7),
    Category.BICYCLE: (1.8, 0.6, 1.3),
    Category.MOTORCYCLE: (2.1, 0.8, 1.4),
    Category.PEDESTRIAN: (0.7, 0.7, 1.75),
    Category.BUS: (11.0, 2.9, 3.5),
    Category.TRAILER: (12.0, 2.9, 3.8),
    Category.TRUCK: (7.0, 2.5, 3.0),
}


@dataclass(frozen=True)
class ScenarioSpec:
    n_objects: int = 10
    n_frames: int = 40
    motion: str = "linear"  # "linear" or "turning"
    sigma_pos: float = 0.0
    drop_rate: float = 0.0
    clutter_rate: float = 0.0
    seed: int = 0
    dt: float = 0.5
    categories: Tuple[str, ...] = ("car",)
    lane_spacing: float = 4.0
    min_speed: float = 3.0
    max_speed: float = 8.0
    max_turn_rate: float = 0.15
    sigma_yaw: float = 0.0
    sigma_vel: float = 0.0
    # consecutive frames per object in which its detections are withheld
    occlusion_length: int = 0

    def __post_init__(self):
        if self.motion not in ("linear", "turning"):
            raise ValueError(f"motion must be 'linear' or 'turning', got {self.motion!r}")
        if self.n_objects < 0 or self.n_frames < 1:
            raise ValueError("need n_objects >= 0 and n_frames >= 1")
        if not (0.0 <= self.drop_rate <= 1.0) or self.clutter_rate < 0 or self.sigma_pos < 0:
            raise ValueError("drop_rate must lie in [0, 1]; clutter_rate and sigma_pos >= 0")
        object.__setattr__(self, "categories", tuple(self.categories))


@dataclass(frozen=True)
class ObjectTrack:
    gt_id: int
    category: Category
    x0: float
    y0: float
    speed: float
    heading0: float
    turn_rate: float
    size: Tuple[float, float, float]

    def pose(self, t: float) -> Tuple[float, float, float]:
        """Closed-form (x, y, heading) after ``t`` seconds."""
        w, v, h0 = self.turn_rate, self.speed, self.heading0
        if abs(w) < 1e-12:
            return self.x0 + v * t * math.cos(h0), self.y0 + v * t * math.sin(h0), h0
        h = h0 + w * t
        return (
            self.x0 + v / w * (math.sin(h) - math.sin(h0)),
            self.y0 - v / w * (math.cos(h) - math.cos(h0)),
            h,
        )

    def box(self, t: float) -> Box3D:
        x, y, h = self.pose(t)
        return Box3D(
            (x, y, 0.5 * self.size[2]),
            self.size,
            h,
            (self.speed * math.cos(h), self.speed * math.sin(h)),
        )


def scenario_objects(spec: ScenarioSpec, rng: np.random.Generator) -> List[ObjectTrack]:
    cats = [Category.parse(c) for c in spec.categories]
    t_mid = 0.5 * (spec.n_frames - 1) * spec.dt
    objs = []
    for k in range(spec.n_objects):
        direction = 1.0 if k % 2 == 0 else -1.0
        speed = float(rng.uniform(spec.min_speed, spec.max_speed))
        heading = 0.0 if direction > 0 else math.pi
        x0 = -direction * speed * t_mid + float(rng.uniform(-8.0, 8.0))
        y0 = (k - 0.5 * (spec.n_objects - 1)) * spec.lane_spacing
        turn = 0.0
        if spec.motion == "turning":
            turn = float(rng.uniform(-spec.max_turn_rate, spec.max_turn_rate))
        cat = cats[k % len(cats)]
        objs.append(ObjectTrack(k + 1, cat, x0, y0, speed, heading, turn, TYPICAL_SIZE[cat]))
    return objs


def synth_scenario(spec: ScenarioSpec) -> Tuple[List[FrameInput], List[GroundTruthFrame]]:
    rng = np.random.default_rng(spec.seed)
    objs = scenario_objects(spec, rng)
    times = [f * spec.dt for f in range(spec.n_frames)]
    gt_boxes = [[o.box(t) for o in objs] for t in times]

    occluded = {}
    if spec.occlusion_length > 0:
        lo = min(5, spec.n_frames - 1)
        hi = max(lo, spec.n_frames - spec.occlusion_length - 1)
        for o in objs:
            start = int(rng.integers(lo, hi + 1))
            occluded[o.gt_id] = range(start, start + spec.occlusion_length)

    all_xy = np.array([b.center[:2] for row in gt_boxes for b in row]).reshape(-1, 2)
    if len(all_xy):
        lo_xy, hi_xy = all_xy.min(axis=0) - 10.0, all_xy.max(axis=0) + 10.0
    else:
        lo_xy, hi_xy = np.array([-50.0, -50.0]), np.array([50.0, 50.0])
    clutter_cats = [Category.parse(c) for c in spec.categories]

    frames, gts = [], []
    for f, t in enumerate(times):
        dets = []
        for o, box in zip(objs, gt_boxes[f]):
            if f in occluded.get(o.gt_id, ()):
                continue
            if spec.drop_rate > 0.0 and rng.random() < spec.drop_rate:
                continue
            if spec.sigma_pos > 0.0 or spec.sigma_yaw > 0.0 or spec.sigma_vel > 0.0:
                noise = rng.normal(0.0, 1.0, 6)
                box = Box3D(
                    tuple(np.add(box.center, spec.sigma_pos * noise[:3])),
                    box.size,
                    box.yaw + spec.sigma_yaw * noise[3],
                    tuple(np.add(box.velocity, spec.sigma_vel * noise[4:6])),
                )
            dets.append((box, float(rng.uniform(0.6, 1.0)), o.category))
        for _ in range(int(rng.poisson(spec.clutter_rate)) if spec.clutter_rate > 0 else 0):
            cat = clutter_cats[int(rng.integers(len(clutter_cats)))]
            size = TYPICAL_SIZE[cat]
            x, y = rng.uniform(lo_xy, hi_xy)
            box = Box3D((x, y, 0.5 * size[2]), size, float(rng.uniform(-math.pi, math.pi)))
            dets.append((box, float(rng.uniform(0.1, 0.5)), cat))
        frames.append(
            FrameInput(
                f,
                t,
                tuple(Detection(b, s, c, f, i) for i, (b, s, c) in enumerate(dets)),
            )
        )
        gts.append(
            GroundTruthFrame(
                f, tuple(GroundTruthObject(o.gt_id, b, o.category) for o, b in zip(objs, gt_boxes[f]))
            )
        )
    return frames, gts
