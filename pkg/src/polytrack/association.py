"""Detection-to-track association: cost construction and four solvers.

Solvers take a cost matrix (rows = detections, columns = tracks) and a gating
threshold and return an :class:`AssociationResult`. Infeasible pairs carry the
``SENTINEL`` cost and are never matched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import Category, Detection, Solver, TrackerConfig, TrackStatus, Tracklet
from .geometry import center_distance, giou_3d, voxel_mask

SENTINEL = 1e9

Pair = Tuple[int, int]


@dataclass
class AssociationResult:
    matched: List[Pair] = field(default_factory=list)
    unmatched_dets: List[int] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)

    @classmethod
    def from_pairs(cls, pairs, n_det: int, n_trk: int) -> "AssociationResult":
        pairs = sorted((int(i), int(j)) for i, j in pairs)
        used_d = {i for i, _ in pairs}
        used_t = {j for _, j in pairs}
        return cls(
            matched=pairs,
            unmatched_dets=[i for i in range(n_det) if i not in used_d],
            unmatched_tracks=[j for j in range(n_trk) if j not in used_t],
        )

    def total_cost(self, cost: np.ndarray) -> float:
        return float(sum(cost[i, j] for i, j in self.matched))


@dataclass
class Hypothesis:
    assignment: AssociationResult
    log_likelihood: float

    @property
    def pairs(self) -> frozenset:
        return frozenset(self.assignment.matched)


CostTensor = Dict[Category, np.ndarray]


def _gate(pairs, cost: np.ndarray, threshold: float) -> List[Pair]:
    return [(i, j) for i, j in pairs if cost[i, j] <= threshold and cost[i, j] < SENTINEL]


def _optimal_pairs(cost: np.ndarray) -> List[Pair]:
    if cost.size == 0:
        return []
    rows, cols = linear_sum_assignment(cost)
    return list(zip(rows.tolist(), cols.tolist()))


def hungarian(cost: np.ndarray, threshold: float) -> AssociationResult:
    """Minimum-total-cost assignment, then pairs above ``threshold`` are released."""
    cost = _as_matrix(cost)
    n_det, n_trk = cost.shape
    return AssociationResult.from_pairs(_gate(_optimal_pairs(cost), cost, threshold), n_det, n_trk)


def greedy(cost: np.ndarray, threshold: float) -> AssociationResult:
    """Repeatedly take the cheapest remaining pair; ties go to the lowest (row, col)."""
    cost = _as_matrix(cost)
    n_det, n_trk = cost.shape
    rows, cols = np.nonzero((cost <= threshold) & (cost < SENTINEL))
    order = np.lexsort((cols, rows, cost[rows, cols]))
    used_d, used_t, pairs = set(), set(), []
    for k in order:
        i, j = int(rows[k]), int(cols[k])
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        pairs.append((i, j))
    return AssociationResult.from_pairs(pairs, n_det, n_trk)


def mnn(cost: np.ndarray, threshold: float) -> AssociationResult:
    """Mutual nearest neighbours: keep (i, j) when each is the other's cheapest option."""
    cost = _as_matrix(cost)
    n_det, n_trk = cost.shape
    if n_det == 0 or n_trk == 0:
        return AssociationResult.from_pairs([], n_det, n_trk)
    best_trk = np.argmin(cost, axis=1)
    best_det = np.argmin(cost, axis=0)
    pairs = [
        (i, int(j))
        for i, j in enumerate(best_trk)
        if best_det[j] == i and cost[i, j] <= threshold and cost[i, j] < SENTINEL
    ]
    return AssociationResult.from_pairs(pairs, n_det, n_trk)


def _as_matrix(cost) -> np.ndarray:
    arr = np.asarray(cost, dtype=float)
    if arr.ndim != 2:
        arr = arr.reshape(len(cost), -1) if arr.size else np.zeros((len(cost), 0))
    return arr


def hypothesis_log_likelihood(result: AssociationResult, cost: np.ndarray, miss_penalty: float) -> float:
    n_unmatched = len(result.unmatched_dets) + len(result.unmatched_tracks)
    return -result.total_cost(cost) - miss_penalty * n_unmatched


def _feasible_components(cost: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Component labels of detections and tracks in the graph of non-sentinel pairs."""
    n_det, n_trk = cost.shape
    rows, cols = np.nonzero(cost < SENTINEL)
    graph = coo_matrix(
        (np.ones(len(rows)), (rows, cols + n_det)), shape=(n_det + n_trk, n_det + n_trk)
    )
    _, labels = connected_components(graph, directed=False)
    return labels[:n_det], labels[n_det:]


def dto_hypotheses(cost: np.ndarray, threshold: float, top_k: int) -> List[Hypothesis]:
    """Candidate assignments for one category, best first.

    The first candidate is the gated optimal assignment. Alternatives come from
    forbidding one pair of the optimal assignment at a time and re-solving; the
    ``top_k - 1`` most likely distinct alternatives are kept.

    Sentinel entries split the problem into independent blocks, so only the
    block holding the forbidden pair is re-solved. Up to ties between equal-cost
    assignments this is the same as re-solving the whole matrix.
    """
    cost = _as_matrix(cost)
    n_det, n_trk = cost.shape
    raw = _optimal_pairs(cost)
    gated = _gate(raw, cost, threshold)
    best = AssociationResult.from_pairs(gated, n_det, n_trk)
    best_ll = hypothesis_log_likelihood(best, cost, threshold)
    hyps = [Hypothesis(best, best_ll)]
    if top_k <= 1 or not raw:
        return hyps
    det_label, trk_label = _feasible_components(cost)
    in_comp: Dict[int, List[Pair]] = {}
    for i, j in gated:
        in_comp.setdefault(int(det_label[i]), []).append((i, j))

    def block_score(pairs: List[Pair]) -> float:
        # the part of the log-likelihood that depends on this block's pairs
        return sum(threshold * 2.0 - cost[i, j] for i, j in pairs)

    candidates = []
    seen = set()
    for i, j in raw:
        if cost[i, j] >= SENTINEL:
            continue
        comp = int(det_label[i])
        rows = np.nonzero(det_label == comp)[0]
        cols = np.nonzero(trk_label == comp)[0]
        block = cost[np.ix_(rows, cols)]
        block[np.searchsorted(rows, i), np.searchsorted(cols, j)] = SENTINEL
        inside = [
            (int(rows[a]), int(cols[b])) for a, b in _gate(_optimal_pairs(block), block, threshold)
        ]
        old = in_comp.get(comp, [])
        key = (comp, frozenset(inside))
        if set(inside) == set(old) or key in seen:
            continue
        seen.add(key)
        ll = best_ll + block_score(inside) - block_score(old)
        candidates.append((ll, comp, inside))
    candidates.sort(key=lambda c: -c[0])
    for ll, comp, inside in candidates[: top_k - 1]:
        pairs = [p for p in gated if det_label[p[0]] != comp] + inside
        alt = AssociationResult.from_pairs(pairs, n_det, n_trk)
        hyps.append(Hypothesis(alt, hypothesis_log_likelihood(alt, cost, threshold)))
    hyps.sort(key=lambda h: -h.log_likelihood)  # stable: the optimal assignment wins ties
    return hyps


def prune_hypotheses(hyps: Sequence[Hypothesis], prune_alpha: float) -> List[Hypothesis]:
    """Drop hypotheses whose likelihood ratio to the best falls below ``prune_alpha``."""
    if not hyps:
        return []
    best = max(h.log_likelihood for h in hyps)
    floor = math.log(prune_alpha) if prune_alpha > 0.0 else -math.inf
    return [h for h in hyps if h.log_likelihood - best >= floor]


def commit_hypotheses(hyps: Sequence[Hypothesis], n_det: int, n_trk: int) -> AssociationResult:
    """Pairs shared by every surviving hypothesis are committed; contested
    detections and tracks follow the most likely hypothesis."""
    consensus = set.intersection(*(set(h.pairs) for h in hyps))
    pairs = set(consensus)
    used_d = {i for i, _ in pairs}
    used_t = {j for _, j in pairs}
    for i, j in hyps[0].assignment.matched:
        if i not in used_d and j not in used_t:
            pairs.add((i, j))
            used_d.add(i)
            used_t.add(j)
    return AssociationResult.from_pairs(pairs, n_det, n_trk)


def dto(
    costs: Mapping[Category, np.ndarray],
    thresholds: Mapping[Category, float],
    top_k: int = 3,
    prune_alpha: float = 0.01,
) -> AssociationResult:
    """Per-category multi-hypothesis association.

    Detection and track indices of each category's matrix are laid out
    consecutively in category order to form the global index lists.
    """
    matched, u_det, u_trk = [], [], []
    det_off = trk_off = 0
    for cat in sorted(costs):
        cost = _as_matrix(costs[cat])
        n_det, n_trk = cost.shape
        tau = thresholds[cat]
        hyps = prune_hypotheses(dto_hypotheses(cost, tau, top_k), prune_alpha)
        res = commit_hypotheses(hyps, n_det, n_trk)
        res = AssociationResult.from_pairs(_gate(res.matched, cost, tau), n_det, n_trk)
        matched += [(i + det_off, j + trk_off) for i, j in res.matched]
        u_det += [i + det_off for i in res.unmatched_dets]
        u_trk += [j + trk_off for j in res.unmatched_tracks]
        det_off += n_det
        trk_off += n_trk
    return AssociationResult(matched, u_det, u_trk)


SOLVERS = {Solver.HUNGARIAN: hungarian, Solver.GREEDY: greedy, Solver.MNN: mnn}


def build_costs(
    det_boxes: Sequence, track_boxes: Sequence, mask: np.ndarray | None = None
) -> np.ndarray:
    """``1 - giou_3d`` for every feasible pair, ``SENTINEL`` elsewhere."""
    n_det, n_trk = len(det_boxes), len(track_boxes)
    cost = np.full((n_det, n_trk), SENTINEL)
    for i in range(n_det):
        for j in range(n_trk):
            if mask is None or mask[i, j]:
                cost[i, j] = 1.0 - giou_3d(det_boxes[i], track_boxes[j])
    return cost


def build_cost_tensor(
    dets: Sequence[Detection], track_boxes: Sequence, track_categories: Sequence[Category], voxel_size: float
) -> Tuple[CostTensor, Dict[Category, List[int]], Dict[Category, List[int]]]:
    """Per-category cost matrices plus the original indices behind their rows and columns."""
    det_idx: Dict[Category, List[int]] = {}
    trk_idx: Dict[Category, List[int]] = {}
    for i, d in enumerate(dets):
        det_idx.setdefault(d.category, []).append(i)
    for j, c in enumerate(track_categories):
        trk_idx.setdefault(c, []).append(j)
    costs: CostTensor = {}
    for cat in sorted(set(det_idx) | set(trk_idx)):
        rows = det_idx.setdefault(cat, [])
        cols = trk_idx.setdefault(cat, [])
        dboxes = [dets[i].box for i in rows]
        tboxes = [track_boxes[j] for j in cols]
        mask = voxel_mask(dboxes, tboxes, voxel_size) if rows and cols else None
        costs[cat] = build_costs(dboxes, tboxes, mask)
    return costs, det_idx, trk_idx


def solve_tensor(
    costs: CostTensor,
    thresholds: Mapping[Category, float],
    solver: Solver,
    top_k: int = 3,
    prune_alpha: float = 0.01,
) -> Dict[Category, AssociationResult]:
    out = {}
    for cat in sorted(costs):
        cost = costs[cat]
        if solver is Solver.DTO:
            out[cat] = dto({cat: cost}, {cat: thresholds[cat]}, top_k, prune_alpha)
        else:
            out[cat] = SOLVERS[solver](cost, thresholds[cat])
    return out


def two_stage_associate(
    dets: Sequence[Detection], tracks: Sequence[Tracklet], cfg: TrackerConfig
) -> AssociationResult:
    """Confirmed tracks first (gIoU cost, configured solver), then the leftover
    detections against tentative tracks (normalised center distance)."""
    n_det, n_trk = len(dets), len(tracks)
    boxes = [t.box for t in tracks]
    confirmed = [j for j, t in enumerate(tracks) if t.status is TrackStatus.CONFIRMED]
    tentative = [j for j, t in enumerate(tracks) if t.status is TrackStatus.TENTATIVE]

    pairs: List[Pair] = []
    costs, det_idx, trk_idx = build_cost_tensor(
        dets, [boxes[j] for j in confirmed], [tracks[j].category for j in confirmed], cfg.voxel_size
    )
    stage1 = solve_tensor(costs, cfg.assoc_threshold, cfg.solver, cfg.mht_top_k, cfg.mht_prune_alpha)
    for cat, res in stage1.items():
        pairs += [(det_idx[cat][i], confirmed[trk_idx[cat][j]]) for i, j in res.matched]

    used = {i for i, _ in pairs}
    leftover = [i for i in range(n_det) if i not in used]
    if leftover and tentative:
        gates = {c: cfg.stage2_gate for c in Category}
        by_cat_d: Dict[Category, List[int]] = {}
        by_cat_t: Dict[Category, List[int]] = {}
        for i in leftover:
            by_cat_d.setdefault(dets[i].category, []).append(i)
        for j in tentative:
            by_cat_t.setdefault(tracks[j].category, []).append(j)
        costs2: CostTensor = {}
        for cat in set(by_cat_d) & set(by_cat_t):
            rows, cols = by_cat_d[cat], by_cat_t[cat]
            costs2[cat] = np.array(
                [[center_distance(dets[i].box, boxes[j]) / cfg.stage2_distance_scale for j in cols] for i in rows]
            )
        stage2 = solve_tensor(costs2, gates, cfg.solver, cfg.mht_top_k, cfg.mht_prune_alpha)
        for cat, res in stage2.items():
            pairs += [(by_cat_d[cat][i], by_cat_t[cat][j]) for i, j in res.matched]
    return AssociationResult.from_pairs(pairs, n_det, n_trk)
