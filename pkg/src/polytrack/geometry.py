"""Rotated-box overlap metrics, NMS and voxel gating.

Everything here works on plain Python floats: the polygons are quads and the
per-pair overhead of numpy would dominate.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .core import Box3D, Detection, OverlapMetric

Point = Tuple[float, float]
Polygon2D = List[Point]

AREA_EPS = 1e-12


def bev_polygon(box: Box3D) -> Polygon2D:
    """Counter-clockwise footprint of ``box`` on the ground plane."""
    cx, cy = box.center[0], box.center[1]
    hl, hw = 0.5 * box.size[0], 0.5 * box.size[1]
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    corners = ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))
    return [(cx + c * px - s * py, cy + s * px + c * py) for px, py in corners]


def polygon_area(poly: Sequence[Point]) -> float:
    """Signed shoelace area (positive for CCW)."""
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * acc


def clip_convex(subject: Sequence[Point], clip: Sequence[Point]) -> Polygon2D:
    """Sutherland-Hodgman: intersection of a polygon with a convex CCW polygon."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp = output
        output = []
        px, py = inp[-1]
        p_side = ex * (py - ay) - ey * (px - ax)
        for qx, qy in inp:
            q_side = ex * (qy - ay) - ey * (qx - ax)
            if q_side >= 0.0:
                if p_side < 0.0:
                    t = p_side / (p_side - q_side)
                    output.append((px + t * (qx - px), py + t * (qy - py)))
                output.append((qx, qy))
            elif p_side >= 0.0:
                t = p_side / (p_side - q_side)
                output.append((px + t * (qx - px), py + t * (qy - py)))
            px, py, p_side = qx, qy, q_side
    return output


def convex_hull(points: Sequence[Point]) -> Polygon2D:
    """Andrew's monotone chain, CCW, collinear points dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return list(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: List[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: List[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _bev_terms(a: Box3D, b: Box3D):
    pa, pb = bev_polygon(a), bev_polygon(b)
    inter = polygon_area(clip_convex(pa, pb))
    if inter < AREA_EPS:
        inter = 0.0
    area_a = a.size[0] * a.size[1]
    area_b = b.size[0] * b.size[1]
    return pa, pb, inter, area_a, area_b


def _z_terms(a: Box3D, b: Box3D):
    a_lo, a_hi = a.center[2] - 0.5 * a.size[2], a.center[2] + 0.5 * a.size[2]
    b_lo, b_hi = b.center[2] - 0.5 * b.size[2], b.center[2] + 0.5 * b.size[2]
    overlap = max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))
    extent = max(a_hi, b_hi) - min(a_lo, b_lo)
    return overlap, extent


def iou_bev(a: Box3D, b: Box3D) -> float:
    _, _, inter, area_a, area_b = _bev_terms(a, b)
    return inter / (area_a + area_b - inter)


def iou_3d(a: Box3D, b: Box3D) -> float:
    _, _, inter, _, _ = _bev_terms(a, b)
    overlap, _ = _z_terms(a, b)
    inter_vol = inter * overlap
    return inter_vol / (a.volume + b.volume - inter_vol)


def giou_bev(a: Box3D, b: Box3D) -> float:
    pa, pb, inter, area_a, area_b = _bev_terms(a, b)
    union = area_a + area_b - inter
    hull = polygon_area(convex_hull(pa + pb))
    return inter / union - (hull - union) / hull


def giou_3d(a: Box3D, b: Box3D) -> float:
    """Generalised IoU with enclosing volume = BEV hull area x joint z-extent."""
    pa, pb, inter, _, _ = _bev_terms(a, b)
    overlap, extent = _z_terms(a, b)
    inter_vol = inter * overlap
    union = a.volume + b.volume - inter_vol
    enclosing = polygon_area(convex_hull(pa + pb)) * extent
    return inter_vol / union - (enclosing - union) / enclosing


def center_distance(a: Box3D, b: Box3D) -> float:
    return math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])


OVERLAP_FUNCTIONS: Dict[OverlapMetric, Callable[[Box3D, Box3D], float]] = {
    OverlapMetric.IOU_BEV: iou_bev,
    OverlapMetric.IOU_3D: iou_3d,
}


def voxel_index(x: float, y: float, voxel_size: float) -> Tuple[int, int]:
    return math.floor(x / voxel_size), math.floor(y / voxel_size)


@dataclass
class NmsStats:
    """Counts pairwise overlap evaluations, used to compare pre-processing orders."""

    comparisons: int = 0


def nms(
    dets: Sequence[Detection],
    threshold: float,
    metric: OverlapMetric | str = OverlapMetric.IOU_BEV,
    voxel_size: float | None = 5.0,
    stats: NmsStats | None = None,
    scale: float = 1.0,
) -> List[Detection]:
    """Greedy score-ordered suppression.

    Candidates are only compared with kept boxes in the same or an 8-adjacent
    voxel cell; pass ``voxel_size=None`` to compare against every kept box.
    Skipping is exact as long as the largest box diagonal does not exceed
    ``voxel_size``. ``scale`` enlarges footprints before overlap is measured
    (scale-NMS for small categories).
    """
    metric_fn = OVERLAP_FUNCTIONS[OverlapMetric(metric)]
    order = sorted(dets, key=lambda d: (-d.score, d.detection_id))
    boxes = {id(d): _scaled(d.box, scale) for d in order}
    kept: List[Detection] = []
    grid: Dict[Tuple[int, int], List[Detection]] = defaultdict(list)
    for det in order:
        box = boxes[id(det)]
        if voxel_size is None:
            neighbours = kept
        else:
            ci, cj = voxel_index(box.center[0], box.center[1], voxel_size)
            neighbours = [
                k for di in (-1, 0, 1) for dj in (-1, 0, 1) for k in grid.get((ci + di, cj + dj), ())
            ]
            neighbours.sort(key=lambda d: (-d.score, d.detection_id))
        suppressed = False
        for other in neighbours:
            if stats is not None:
                stats.comparisons += 1
            if metric_fn(box, boxes[id(other)]) > threshold:
                suppressed = True
                break
        if suppressed:
            continue
        kept.append(det)
        if voxel_size is not None:
            grid[(ci, cj)].append(det)
    return kept


def _scaled(box: Box3D, scale: float) -> Box3D:
    if scale == 1.0:
        return box
    l, w, h = box.size
    return Box3D(box.center, (l * scale, w * scale, h), box.yaw, box.velocity)


def voxel_mask(
    det_xy: np.ndarray | Sequence[Box3D],
    track_xy: np.ndarray | Sequence[Box3D],
    voxel_size: float,
) -> np.ndarray:
    """Feasibility of detection/track pairs: True iff their BEV cells touch.

    Accepts ``(N, 2)`` arrays of centers, or sequences of boxes, detections
    or tracklets (anything with a ``box``).
    """
    if voxel_size <= 0.0:
        raise ValueError("voxel_size must be positive")
    dc = np.floor(_centers(det_xy) / voxel_size)
    tc = np.floor(_centers(track_xy) / voxel_size)
    diff = np.abs(dc[:, None, :] - tc[None, :, :])
    return np.all(diff <= 1.0, axis=2)


def _centers(items) -> np.ndarray:
    if isinstance(items, np.ndarray):
        return items.reshape(-1, 2).astype(float)
    boxes = [getattr(item, "box", item) for item in items]
    return np.array([(b.center[0], b.center[1]) for b in boxes], dtype=float).reshape(-1, 2)
