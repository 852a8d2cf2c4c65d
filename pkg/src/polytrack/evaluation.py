"""CLEAR-MOT and recall-sweep (AMOTA) metrics over BEV center distance."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Box3D, Category

DIST_THRESHOLD = 2.0
N_RECALL = 40
_BIG = 1e9


@dataclass(frozen=True)
class GroundTruthObject:
    gt_id: int
    box: Box3D
    category: Category


@dataclass(frozen=True)
class GroundTruthFrame:
    frame_index: int
    objects: Tuple[GroundTruthObject, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.gt_id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate gt ids in frame {self.frame_index}")


@dataclass
class FrameMatch:
    pairs: List[Tuple[int, int, float]]  # (gt_id, track_id, distance)
    fp: int
    fn: int
    ids: int
    last_match: Dict[int, int]


def _xy(box: Box3D) -> Tuple[float, float]:
    return box.center[0], box.center[1]


def _match(gt_ids, gt_xy, hyp_ids, hyp_xy, dist_threshold, last_match):
    """Core CLEAR-MOT assignment for one frame on raw arrays."""
    n_gt, n_hyp = len(gt_ids), len(hyp_ids)
    if n_gt and n_hyp:
        dist = np.hypot(gt_xy[:, None, 0] - hyp_xy[None, :, 0], gt_xy[:, None, 1] - hyp_xy[None, :, 1])
    else:
        dist = np.zeros((n_gt, n_hyp))
    col_of = {tid: k for k, tid in enumerate(hyp_ids)}
    pairs = []
    used_g, used_h = set(), set()
    # keep last frame's correspondences while they remain valid
    for g, gid in enumerate(gt_ids):
        tid = last_match.get(gid)
        h = col_of.get(tid) if tid is not None else None
        if h is not None and h not in used_h and dist[g, h] <= dist_threshold:
            pairs.append((g, h))
            used_g.add(g)
            used_h.add(h)
    rows = [g for g in range(n_gt) if g not in used_g]
    cols = [h for h in range(n_hyp) if h not in used_h]
    ids = 0
    if rows and cols:
        sub = dist[np.ix_(rows, cols)]
        cost = np.where(sub <= dist_threshold, sub, _BIG)
        r, c = linear_sum_assignment(cost)
        for a, b in zip(r, c):
            if cost[a, b] < _BIG:
                g, h = rows[a], cols[b]
                pairs.append((g, h))
                prev = last_match.get(gt_ids[g])
                if prev is not None and prev != hyp_ids[h]:
                    ids += 1
    new_last = dict(last_match)
    out = []
    for g, h in pairs:
        new_last[gt_ids[g]] = hyp_ids[h]
        out.append((gt_ids[g], hyp_ids[h], float(dist[g, h])))
    return out, n_hyp - len(pairs), n_gt - len(pairs), ids, new_last


def match_frame(
    gt: GroundTruthFrame,
    hyp,
    dist_threshold: float = DIST_THRESHOLD,
    last_match: Optional[Mapping[int, int]] = None,
) -> FrameMatch:
    """Match one frame of ground truth against tracker output.

    ``hyp`` is a ``FrameOutput`` (or anything with ``frame_index`` and
    ``tracks``); ``last_match`` maps gt ids to the track id they were last
    matched to and is returned updated.
    """
    if gt.frame_index != hyp.frame_index:
        raise ValueError(f"frame mismatch: gt {gt.frame_index} vs hypotheses {hyp.frame_index}")
    gt_ids = [o.gt_id for o in gt.objects]
    hyp_ids = [t.track_id for t in hyp.tracks]
    gt_xy = np.array([_xy(o.box) for o in gt.objects], dtype=float).reshape(-1, 2)
    hyp_xy = np.array([_xy(t.box) for t in hyp.tracks], dtype=float).reshape(-1, 2)
    pairs, fp, fn, ids, last = _match(gt_ids, gt_xy, hyp_ids, hyp_xy, dist_threshold, dict(last_match or {}))
    return FrameMatch(pairs, fp, fn, ids, last)


def mota(fp: int, fn: int, ids: int, n_gt: int) -> float:
    if n_gt <= 0:
        raise ValueError("MOTA is undefined without ground-truth objects")
    return 1.0 - (fp + fn + ids) / n_gt


def motar(fp: int, fn: int, ids: int, n_gt: int, recall: float) -> float:
    """Recall-normalised MOTA, clipped at zero."""
    if recall <= 0.0:
        return 0.0
    return max(0.0, 1.0 - (ids + fp + fn - (1.0 - recall) * n_gt) / (recall * n_gt))


@dataclass
class ClearMotTotals:
    n_gt: int = 0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    ids: int = 0
    dist_sum: float = 0.0
    matched_scores: List[float] = field(default_factory=list)


@dataclass
class _FrameData:
    gt_ids: list
    gt_xy: np.ndarray
    hyp_ids: list
    hyp_xy: np.ndarray
    hyp_scores: np.ndarray


def _clear_mot(frames: Sequence[_FrameData], dist_threshold: float, min_score: float = -math.inf) -> ClearMotTotals:
    tot = ClearMotTotals()
    last: Dict[int, int] = {}
    for fd in frames:
        keep = np.nonzero(fd.hyp_scores >= min_score)[0]
        hyp_ids = [fd.hyp_ids[k] for k in keep]
        pairs, fp, fn, ids, last = _match(fd.gt_ids, fd.gt_xy, hyp_ids, fd.hyp_xy[keep], dist_threshold, last)
        score_of = {fd.hyp_ids[k]: fd.hyp_scores[k] for k in keep}
        tot.n_gt += len(fd.gt_ids)
        tot.tp += len(pairs)
        tot.fp += fp
        tot.fn += fn
        tot.ids += ids
        for _, tid, d in pairs:
            tot.dist_sum += d
            tot.matched_scores.append(float(score_of[tid]))
    return tot


@dataclass
class CategoryMetrics:
    n_gt: int
    tp: int
    fp: int
    fn: int
    ids: int
    mota: float
    motp: float
    recall: float
    amota: float
    amotp: float
    samota: float
    mota_best: float  # highest MOTA over the recall sweep thresholds
    ids_best: int  # IDS at that threshold


@dataclass
class MetricReport:
    per_category: Dict[Category, CategoryMetrics]
    aggregate: CategoryMetrics
    dist_threshold: float = DIST_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "dist_threshold": self.dist_threshold,
            "aggregate": asdict(self.aggregate),
            "per_category": {c.label: asdict(m) for c, m in self.per_category.items()},
        }


def recall_points(n: int = N_RECALL) -> np.ndarray:
    return np.arange(1, n + 1) / n


def _sweep(frames, dist_threshold, n_recall, full: ClearMotTotals) -> CategoryMetrics:
    n_gt = full.n_gt
    if n_gt == 0:
        raise ValueError("AMOTA is undefined without ground-truth objects")
    scores = sorted(full.matched_scores, reverse=True)
    motars, motps, smotas = [], [], []
    best = (mota(full.fp, full.fn, full.ids, n_gt), full.ids)
    cache: Dict[float, ClearMotTotals] = {}
    for r in recall_points(n_recall):
        need = math.ceil(r * n_gt - 1e-9)
        if need > len(scores):
            motars.append(0.0)
            smotas.append(0.0)
            motps.append(dist_threshold)
            continue
        thr = scores[need - 1]
        if thr not in cache:
            cache[thr] = _clear_mot(frames, dist_threshold, thr)
        res = cache[thr]
        rec = res.tp / n_gt
        m = motar(res.fp, res.fn, res.ids, n_gt, rec)
        motars.append(m)
        s = 1.0 - (res.ids + res.fp + res.fn - (1.0 - r) * n_gt) / (r * n_gt)
        smotas.append(min(1.0, max(0.0, s)))
        motps.append(res.dist_sum / res.tp if res.tp else dist_threshold)
        mt = mota(res.fp, res.fn, res.ids, n_gt)
        if mt > best[0]:
            best = (mt, res.ids)
    return CategoryMetrics(
        n_gt=n_gt,
        tp=full.tp,
        fp=full.fp,
        fn=full.fn,
        ids=full.ids,
        mota=mota(full.fp, full.fn, full.ids, n_gt),
        motp=full.dist_sum / full.tp if full.tp else dist_threshold,
        recall=full.tp / n_gt,
        amota=float(np.mean(motars)),
        amotp=float(np.mean(motps)),
        samota=float(np.mean(smotas)),
        mota_best=best[0],
        ids_best=best[1],
    )


def _frame_data(gt_frames, hyp_by_frame, category) -> List[_FrameData]:
    out = []
    for gf in gt_frames:
        objs = [o for o in gf.objects if o.category == category]
        hyp = hyp_by_frame.get(gf.frame_index)
        trks = [t for t in (hyp.tracks if hyp is not None else ()) if t.category == category]
        out.append(
            _FrameData(
                gt_ids=[o.gt_id for o in objs],
                gt_xy=np.array([_xy(o.box) for o in objs], dtype=float).reshape(-1, 2),
                hyp_ids=[t.track_id for t in trks],
                hyp_xy=np.array([_xy(t.box) for t in trks], dtype=float).reshape(-1, 2),
                hyp_scores=np.array([t.score for t in trks], dtype=float),
            )
        )
    return out


def evaluate(
    gt_frames: Sequence[GroundTruthFrame],
    hyp_frames: Iterable,
    dist_threshold: float = DIST_THRESHOLD,
    n_recall: int = N_RECALL,
) -> MetricReport:
    """Per-category CLEAR-MOT and recall-sweep metrics.

    Tracker output for frames absent from ``gt_frames`` is ignored. Categories
    with ground truth are averaged for AMOTA/AMOTP/sAMOTA; counts are pooled.
    """
    hyp_by_frame = {h.frame_index: h for h in hyp_frames}
    gt_frames = sorted(gt_frames, key=lambda g: g.frame_index)
    cats = sorted({o.category for g in gt_frames for o in g.objects})
    if not cats:
        raise ValueError("no ground-truth objects to evaluate against")
    per_cat: Dict[Category, CategoryMetrics] = {}
    for cat in cats:
        frames = _frame_data(gt_frames, hyp_by_frame, cat)
        full = _clear_mot(frames, dist_threshold)
        per_cat[cat] = _sweep(frames, dist_threshold, n_recall, full)
    # false positives in categories without ground truth still count
    stray_fp = 0
    for h in hyp_by_frame.values():
        stray_fp += sum(1 for t in h.tracks if t.category not in per_cat)
    ms = list(per_cat.values())
    n_gt = sum(m.n_gt for m in ms)
    tp = sum(m.tp for m in ms)
    fp = sum(m.fp for m in ms) + stray_fp
    fn = sum(m.fn for m in ms)
    ids = sum(m.ids for m in ms)
    agg = CategoryMetrics(
        n_gt=n_gt,
        tp=tp,
        fp=fp,
        fn=fn,
        ids=ids,
        mota=mota(fp, fn, ids, n_gt),
        motp=float(np.average([m.motp for m in ms], weights=[max(m.tp, 1) for m in ms])),
        recall=tp / n_gt,
        amota=float(np.mean([m.amota for m in ms])),
        amotp=float(np.mean([m.amotp for m in ms])),
        samota=float(np.mean([m.samota for m in ms])),
        mota_best=float(np.mean([m.mota_best for m in ms])),
        ids_best=sum(m.ids_best for m in ms),
    )
    return MetricReport(per_cat, agg, dist_threshold)


def amota(gt_frames, hyp_frames, dist_threshold: float = DIST_THRESHOLD, n_recall: int = N_RECALL) -> float:
    return evaluate(gt_frames, hyp_frames, dist_threshold, n_recall).aggregate.amota
