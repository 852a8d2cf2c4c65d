from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polytrack import default_config
from polytrack.core import Box3D, Category, Detection, LifeCycleMode, TrackStatus
from polytrack.lifecycle import ewma, on_match, on_miss, should_terminate, spawn

CFG = default_config()


def det(score=0.9, cat=Category.CAR, velocity=(0.0, 0.0)):
    return Detection(Box3D((0, 0, 0.8), (4, 2, 1.6), 0.0, velocity), score, cat)


def track(score=0.9, cat=Category.CAR, status=TrackStatus.CONFIRMED, tid=1):
    t = spawn(det(score, cat), tid, CFG)
    t.status = status
    return t


def test_spawn_examples():
    t = spawn(det(0.9), 7, CFG)
    assert t.score_avg == 0.9 and t.status is TrackStatus.TENTATIVE and t.track_id == 7
    assert spawn(det(velocity=(3.0, 4.0)), 1, CFG).filter_state.x[3] == 5.0


def test_match_examples():
    t = track(0.5)
    on_match(t, 1.0, CFG)
    assert t.score_avg == pytest.approx(0.6)
    assert t.score_latest == 1.0
    t = track(0.5)
    on_match(t, 0.5, CFG)
    assert t.score_avg == pytest.approx(0.5)
    t = track(status=TrackStatus.TENTATIVE)
    assert t.hits == 1
    on_match(t, 0.8, CFG)
    assert t.status is TrackStatus.CONFIRMED and t.hits == 2 and t.misses == 0


def test_miss_examples():
    t = track(0.5)
    on_miss(t, CFG)
    assert t.score_latest == pytest.approx(0.24)
    t = track(0.1, Category.PEDESTRIAN)
    on_miss(t, CFG)
    assert t.score_latest == 0.0
    t = track(0.6)
    on_miss(t, CFG)
    on_miss(t, CFG)
    assert t.score_latest == pytest.approx(0.08)
    assert t.misses == 2


def test_terminated_track_rejects_updates():
    t = track()
    t.status = TrackStatus.TERMINATED
    with pytest.raises(ValueError):
        on_match(t, 0.5, CFG)
    with pytest.raises(ValueError):
        on_miss(t, CFG)


def cfg_mode(mode):
    return replace(CFG, life_cycle_mode=mode)


def test_termination_examples():
    t = track()
    t.misses = 21
    assert should_terminate(t, cfg_mode(LifeCycleMode.COUNT_MAX_AGE))
    t.misses = 20
    assert not should_terminate(t, cfg_mode(LifeCycleMode.COUNT_MAX_AGE))

    bus = track(cat=Category.BUS)
    bus.score_avg = 0.07
    assert should_terminate(bus, cfg_mode(LifeCycleMode.CONFIDENCE_AVERAGE))
    car = track()
    car.score_avg = 0.05
    assert not should_terminate(car, cfg_mode(LifeCycleMode.CONFIDENCE_AVERAGE))


def test_mixed_mode_uses_both_rules():
    cfg = cfg_mode(LifeCycleMode.CONFIDENCE_COUNT_MIXED)
    t = track()
    t.score_avg = 0.03
    assert should_terminate(t, cfg)
    t.score_avg = 0.5
    t.misses = 21
    assert should_terminate(t, cfg)
    t.misses = 3
    assert not should_terminate(t, cfg)


def test_latest_mode_reads_latest_score():
    cfg = cfg_mode(LifeCycleMode.CONFIDENCE_LATEST)
    t = track()
    t.score_latest, t.score_avg = 0.03, 0.9
    assert should_terminate(t, cfg)
    t.score_latest, t.score_avg = 0.9, 0.03
    assert not should_terminate(t, cfg)


@pytest.mark.parametrize("mode", list(LifeCycleMode))
def test_tentative_dies_on_first_miss(mode):
    t = track(status=TrackStatus.TENTATIVE)
    on_miss(t, CFG)
    assert should_terminate(t, cfg_mode(mode))


@pytest.mark.parametrize("max_age", [1, 5, 20])
def test_count_mode_survives_exactly_max_age_misses(max_age):
    cfg = replace(CFG, life_cycle_mode=LifeCycleMode.COUNT_MAX_AGE, max_age=max_age)
    t = track()
    survived = 0
    while True:
        on_miss(t, cfg)
        if should_terminate(t, cfg):
            break
        survived += 1
    assert survived == max_age


@given(st.floats(0, 1), st.lists(st.floats(0, 1), max_size=30))
def test_ewma_stays_within_observed_range(start, obs):
    v = start
    for o in obs:
        v = ewma(v, o, 0.2)
    lo, hi = min([start] + obs), max([start] + obs)
    assert lo - 1e-12 <= v <= hi + 1e-12


@given(st.lists(st.booleans(), max_size=40))
def test_scores_stay_in_unit_interval(events):
    t = track(0.7)
    for hit in events:
        if hit:
            on_match(t, 0.7, CFG)
        else:
            on_miss(t, CFG)
        assert 0.0 <= t.score_latest <= 1.0
        assert 0.0 <= t.score_avg <= 1.0
