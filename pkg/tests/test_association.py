import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from polytrack import default_config
from polytrack.association import (
    SENTINEL,
    AssociationResult,
    Hypothesis,
    build_cost_tensor,
    build_costs,
    commit_hypotheses,
    dto,
    dto_hypotheses,
    greedy,
    hungarian,
    mnn,
    prune_hypotheses,
    two_stage_associate,
)
from polytrack.core import Box3D, Category, Detection, Solver, TrackStatus
from polytrack.geometry import giou_3d
from polytrack.lifecycle import spawn

SOLVERS = [hungarian, greedy, mnn]

small_costs = st.integers(0, 5).flatmap(
    lambda n: st.integers(0, 5).flatmap(
        lambda m: arrays(np.float64, (n, m), elements=st.floats(0, 3, allow_nan=False))
    )
)


def with_sentinels(draw_cost, mask):
    c = draw_cost.copy()
    c[mask] = SENTINEL
    return c


def test_hungarian_examples():
    res = hungarian(np.array([[1.0, 2.0], [2.0, 1.0]]), 10)
    assert res.matched == [(0, 0), (1, 1)] and res.total_cost(np.array([[1, 2], [2, 1]])) == 2
    empty = hungarian(np.zeros((0, 0)), 1.0)
    assert empty == AssociationResult()
    res = hungarian(np.array([[0.5]]), 0.4)
    assert res.matched == [] and res.unmatched_dets == [0] and res.unmatched_tracks == [0]


def test_greedy_examples():
    assert greedy(np.array([[1.0, 2.0], [2.0, 1.0]]), 10).matched == [(0, 0), (1, 1)]
    cost = np.array([[1.0, 1.1], [1.2, 5.0]])
    g, h = greedy(cost, 10), hungarian(cost, 10)
    assert g.matched == [(0, 0), (1, 1)] and g.total_cost(cost) == 6.0
    assert h.matched == [(0, 1), (1, 0)] and h.total_cost(cost) == pytest.approx(2.3)
    assert greedy(np.full((2, 3), 5.0), 1.0).matched == []


def test_mnn_examples():
    assert mnn(np.array([[1.0, 2.0], [2.0, 1.0]]), 10).matched == [(0, 0), (1, 1)]
    assert mnn(np.array([[1.0, 1.1], [1.2, 5.0]]), 10).matched == [(0, 0)]
    assert mnn(np.array([[0.3]]), 1.0).matched == [(0, 0)]


@settings(max_examples=300)
@given(small_costs)
def test_hungarian_is_optimal(cost):
    best, _ = oracles.brute_force_assignment(cost)
    res = hungarian(cost, math.inf)
    assert res.total_cost(cost) == pytest.approx(best, abs=1e-12)
    assert len(res.matched) == min(cost.shape)


@settings(max_examples=300)
@given(small_costs, st.floats(0, 3))
@pytest.mark.parametrize("solver", SOLVERS)
def test_results_partition_indices(solver, cost, tau):
    res = solver(cost, tau)
    n, m = cost.shape
    dets = [i for i, _ in res.matched]
    trks = [j for _, j in res.matched]
    assert sorted(dets + res.unmatched_dets) == list(range(n))
    assert sorted(trks + res.unmatched_tracks) == list(range(m))
    assert all(cost[i, j] <= tau for i, j in res.matched)


@settings(max_examples=200)
@given(small_costs, st.floats(0, 3), st.floats(0, 3))
def test_greedy_and_mnn_monotone_in_threshold(cost, t1, t2):
    lo, hi = sorted((t1, t2))
    assert len(greedy(cost, lo).matched) <= len(greedy(cost, hi).matched)
    # MNN pairs at a tight gate survive a looser one
    assert set(mnn(cost, lo).matched) <= set(mnn(cost, hi).matched)


@settings(max_examples=200)
@given(small_costs, st.data())
@pytest.mark.parametrize("solver", SOLVERS)
def test_sentinel_never_matched(solver, cost, data):
    mask = data.draw(arrays(bool, cost.shape))
    c = with_sentinels(cost, mask)
    res = solver(c, math.inf)
    assert all(c[i, j] < SENTINEL for i, j in res.matched)


def test_dto_examples():
    cost = np.array([[0.1, 5.0], [5.0, 0.1]])
    res = dto({Category.CAR: cost}, {Category.CAR: 1.2})
    assert res.matched == hungarian(cost, 1.2).matched == [(0, 0), (1, 1)]

    res = dto(
        {Category.CAR: np.array([[0.2]]), Category.PEDESTRIAN: np.array([[0.3]])},
        {Category.CAR: 1.2, Category.PEDESTRIAN: 1.78},
    )
    assert res.matched == [(0, 0), (1, 1)]
    assert res.unmatched_dets == [] and res.unmatched_tracks == []


def test_dto_offsets_with_unmatched():
    costs = {
        Category.CAR: np.array([[0.2, 9.0], [9.0, 9.0]]),
        Category.BUS: np.zeros((0, 1)),
        Category.PEDESTRIAN: np.array([[9.0], [0.1]]),
    }
    res = dto(costs, {c: 1.2 for c in costs})
    # category order: car (dets 0-1, tracks 0-1), pedestrian (dets 2-3, track 2), bus (track 3)
    assert res.matched == [(0, 0), (3, 2)]
    assert res.unmatched_dets == [1, 2]
    assert res.unmatched_tracks == [1, 3]


@settings(max_examples=300)
@given(small_costs, st.floats(0, 3), st.data())
def test_dto_top1_is_gated_hungarian(cost, tau, data):
    c = with_sentinels(cost, data.draw(arrays(bool, cost.shape)))
    assert dto({Category.CAR: c}, {Category.CAR: tau}, top_k=1) == hungarian(c, tau)


@settings(max_examples=200)
@given(small_costs, st.floats(0.1, 3), st.data())
def test_dto_hypothesis_invariants(cost, tau, data):
    c = with_sentinels(cost, data.draw(arrays(bool, cost.shape)))
    hyps = dto_hypotheses(c, tau, top_k=10)
    # the miss penalty can rank an alternative above the gated optimum
    assert hungarian(c, tau) in [h.assignment for h in hyps]
    lls = [h.log_likelihood for h in hyps]
    assert lls == sorted(lls, reverse=True)
    assert len({h.pairs for h in hyps}) == len(hyps)
    n, m = c.shape
    for h in hyps:
        res = h.assignment
        assert all(c[i, j] <= tau for i, j in res.matched)
        unmatched = n + m - 2 * len(res.matched)
        assert h.log_likelihood == pytest.approx(-res.total_cost(c) - tau * unmatched, abs=1e-9)


def _full_resolve_alternatives(c, tau):
    """Forbid each optimal pair in the whole matrix and re-solve from scratch."""
    from scipy.optimize import linear_sum_assignment

    n, m = c.shape
    r, k = linear_sum_assignment(c)
    best = {(i, j) for i, j in zip(r, k) if c[i, j] <= tau}
    found = {}
    for i, j in zip(r, k):
        if c[i, j] >= SENTINEL:
            continue
        d = c.copy()
        d[i, j] = SENTINEL
        rr, kk = linear_sum_assignment(d)
        pairs = frozenset((a, b) for a, b in zip(rr, kk) if d[a, b] <= tau)
        if pairs != best:
            found[pairs] = -sum(c[a, b] for a, b in pairs) - tau * (n + m - 2 * len(pairs))
    return sorted(found.values(), reverse=True)


@pytest.mark.parametrize("seed", range(100))
def test_dto_alternatives_match_full_resolve(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 7, 2)
    c = rng.uniform(0, 2, (n, m))
    c[rng.random((n, m)) < 0.4] = SENTINEL
    tau = 1.2
    expected = _full_resolve_alternatives(c, tau)
    hyps = dto_hypotheses(c, tau, top_k=50)
    gated = hungarian(c, tau)
    got = sorted((h.log_likelihood for h in hyps if h.assignment != gated), reverse=True)
    np.testing.assert_allclose(got, expected, atol=1e-9)


def test_dto_prefers_more_matches_when_misses_cost_more():
    cost = np.array([[2.5, 1.0], [2.0, 0.0]])
    hyps = dto_hypotheses(cost, 2.0, top_k=3)
    assert hyps[0].pairs == frozenset({(0, 1), (1, 0)})
    assert hyps[0].log_likelihood == pytest.approx(-3.0)
    assert hyps[1].pairs == frozenset({(1, 1)})
    assert hyps[1].log_likelihood == pytest.approx(-4.0)


def test_dto_alternative_forbids_an_optimal_pair():
    cost = np.array([[0.1, 0.3], [0.3, 0.2]])
    hyps = dto_hypotheses(cost, 1.0, top_k=3)
    assert [h.pairs for h in hyps] == [frozenset({(0, 0), (1, 1)}), frozenset({(0, 1), (1, 0)})]
    assert hyps[1].log_likelihood == pytest.approx(-0.6)


def test_prune_and_commit():
    a = Hypothesis(AssociationResult.from_pairs([(0, 0), (1, 1)], 2, 2), -0.3)
    b = Hypothesis(AssociationResult.from_pairs([(0, 0), (1, 2)], 2, 3), -0.5)
    c = Hypothesis(AssociationResult.from_pairs([], 2, 2), -20.0)
    kept = prune_hypotheses([a, b, c], 0.01)
    assert kept == [a, b]
    res = commit_hypotheses(kept, 2, 3)
    assert res.matched == [(0, 0), (1, 1)]
    assert res.unmatched_tracks == [2]


def box(x, y=0.0, size=(4.0, 2.0, 1.5)):
    return Box3D((x, y, 0.75), size)


def test_build_costs():
    b = box(0.0)
    assert build_costs([b], [b])[0, 0] == pytest.approx(0.0, abs=1e-12)
    mask = np.array([[False]])
    assert build_costs([b], [b], mask)[0, 0] == SENTINEL
    rng = np.random.default_rng(0)
    dets = [Box3D((*rng.uniform(-3, 3, 2), 0.7), (4, 2, 1.5), rng.uniform(-3, 3)) for _ in range(3)]
    trks = [Box3D((*rng.uniform(-3, 3, 2), 0.7), (4, 2, 1.5), rng.uniform(-3, 3)) for _ in range(2)]
    cost = build_costs(dets, trks)
    for i in range(3):
        for j in range(2):
            assert cost[i, j] == 1.0 - giou_3d(dets[i], trks[j])
    assert build_costs([], trks).shape == (0, 2)


def test_build_cost_tensor_splits_by_category():
    dets = [Detection(box(0), 0.9, Category.CAR), Detection(box(50), 0.9, Category.PEDESTRIAN, 0, 1)]
    costs, det_idx, trk_idx = build_cost_tensor(dets, [box(0.5), box(100)], [Category.CAR, Category.CAR], 5.0)
    assert set(costs) == {Category.CAR, Category.PEDESTRIAN}
    assert costs[Category.CAR].shape == (1, 2)
    assert costs[Category.CAR][0, 1] == SENTINEL
    assert costs[Category.PEDESTRIAN].shape == (1, 0)
    assert det_idx[Category.PEDESTRIAN] == [1] and trk_idx[Category.CAR] == [0, 1]


def _track(x, tid, status, cfg):
    t = spawn(Detection(box(x), 0.9, Category.CAR), tid, cfg)
    t.status = status
    return t


def test_two_stage_examples():
    cfg = default_config()
    dets = [Detection(box(0.2), 0.9, Category.CAR, 0, 0), Detection(box(30.3), 0.9, Category.CAR, 0, 1)]
    tracks = [_track(0.0, 1, TrackStatus.CONFIRMED, cfg), _track(30.0, 2, TrackStatus.TENTATIVE, cfg)]
    res = two_stage_associate(dets, tracks, cfg)
    assert res.matched == [(0, 0), (1, 1)]

    only_confirmed = [tracks[0]]
    res = two_stage_associate(dets, only_confirmed, cfg)
    assert res.matched == [(0, 0)] and res.unmatched_dets == [1]

    res = two_stage_associate([], tracks, cfg)
    assert res.matched == [] and res.unmatched_tracks == [0, 1]


def test_two_stage_tentative_far_away_stays_unmatched():
    cfg = default_config()
    dets = [Detection(box(20.0), 0.9, Category.CAR)]
    tracks = [_track(0.0, 1, TrackStatus.TENTATIVE, cfg)]
    assert two_stage_associate(dets, tracks, cfg).matched == []


@pytest.mark.parametrize("solver", list(Solver))
def test_two_stage_respects_configured_solver(solver):
    cfg = replace(default_config(), solver=solver)
    dets = [Detection(box(0.1), 0.9, Category.CAR)]
    tracks = [_track(0.0, 1, TrackStatus.CONFIRMED, cfg)]
    assert two_stage_associate(dets, tracks, cfg).matched == [(0, 0)]
