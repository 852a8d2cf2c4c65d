import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polytrack import ScenarioSpec, default_config, run_sequence, synth_scenario
from polytrack.core import Category, LifeCycleMode, Solver
from polytrack.io import (
    DETECTIONS_HEADER,
    FormatError,
    apply_config_entries,
    env_overrides,
    format_config,
    format_detections,
    format_ground_truth,
    format_tracks,
    load_config,
    load_scenario,
    parse_detections,
    parse_ground_truth,
    parse_key_values,
    parse_tracks,
)


def lines(text):
    return text.splitlines()


def test_empty_stream():
    assert parse_detections([]) == []
    assert parse_detections([DETECTIONS_HEADER]) == []


def test_records_grouped_into_frames():
    text = [
        DETECTIONS_HEADER,
        "0,0.0,car,0,0,0,4,2,1.5,0,0,0,0.9",
        "0,0.0,ped,5,0,0,0.7,0.7,1.7,0,0,0,0.8",
        "1,0.5,car,0.5,0,0,4,2,1.5,0,1,0,0.7",
    ]
    frames = parse_detections(text)
    assert [len(f.detections) for f in frames] == [2, 1]
    assert frames[0].detections[1].category is Category.PEDESTRIAN
    assert frames[1].timestamp == 0.5
    assert [d.detection_id for d in frames[0].detections] == [0, 1]


def test_gap_frames_are_interpolated():
    frames = parse_detections([DETECTIONS_HEADER, "0,0.0", "3,1.5,car,0,0,0,4,2,1.5,0,0,0,0.9"])
    assert [f.frame_index for f in frames] == [0, 1, 2, 3]
    assert [f.timestamp for f in frames] == pytest.approx([0.0, 0.5, 1.0, 1.5])
    assert not frames[1].detections


@pytest.mark.parametrize(
    "record, message",
    [
        ("0,0.0,car,0,0,0,4,2,1.5,0,0", "expected 2 or 13 fields"),
        ("0,0.0,zeppelin,0,0,0,4,2,1.5,0,0,0,0.9", "zeppelin"),
        ("0,0.0,car,0,0,0,4,2,1.5,0,0,0,1.9", "score"),
        ("0,0.0,car,x,0,0,4,2,1.5,0,0,0,0.9", "x"),
        ("0,0.0,car,0,0,0,0,2,1.5,0,0,0,0.9", "positive"),
    ],
)
def test_malformed_records_name_the_line(record, message):
    with pytest.raises(FormatError, match=message) as exc:
        parse_detections([DETECTIONS_HEADER, "# comment", record])
    assert exc.value.line_no == 3
    assert "line 3" in str(exc.value)


def test_frame_order_and_timestamps_checked():
    with pytest.raises(FormatError, match="must not decrease"):
        parse_detections([DETECTIONS_HEADER, "1,0.5", "0,0.0"])
    with pytest.raises(FormatError, match="conflicting"):
        parse_detections([DETECTIONS_HEADER, "0,0.0", "0,0.1"])


def test_header_required_and_checked():
    with pytest.raises(FormatError, match="missing header"):
        parse_detections(["0,0.0"])
    with pytest.raises(FormatError, match="expected a polytrack-detections"):
        parse_detections(["# polytrack-tracks 1", "0,0.0"])
    with pytest.raises(FormatError, match="version"):
        parse_detections(["# polytrack-detections 2", "0,0.0"])


scenarios = st.builds(
    ScenarioSpec,
    n_objects=st.integers(0, 5),
    n_frames=st.integers(1, 8),
    motion=st.sampled_from(["linear", "turning"]),
    sigma_pos=st.floats(0, 1),
    drop_rate=st.floats(0, 0.5),
    clutter_rate=st.floats(0, 2),
    seed=st.integers(0, 2**31),
    categories=st.lists(st.sampled_from([c.label for c in Category]), min_size=1, max_size=3).map(tuple),
)


@settings(max_examples=40, deadline=None)
@given(scenarios)
def test_detection_and_gt_round_trip(spec):
    frames, gt = synth_scenario(spec)
    text = format_detections(frames)
    again = parse_detections(lines(text))
    assert format_detections(again) == text
    assert len(again) == len(frames)
    for a, b in zip(frames, again):
        assert len(a.detections) == len(b.detections)
        for da, db in zip(a.detections, b.detections):
            assert da.category is db.category
            assert da.box.center == pytest.approx(db.box.center, abs=1e-6)
            assert math.cos(da.box.yaw - db.box.yaw) == pytest.approx(1.0, abs=1e-9)
    gtext = format_ground_truth(gt)
    parsed_gt = parse_ground_truth(lines(gtext))
    assert format_ground_truth(parsed_gt) == gtext
    assert [g.frame_index for g in parsed_gt] == [g.frame_index for g in gt]


def test_tracks_round_trip():
    frames, _ = synth_scenario(ScenarioSpec(n_objects=4, n_frames=10, sigma_pos=0.2, seed=1))
    out, _ = run_sequence(frames, default_config())
    text = format_tracks(out)
    parsed = parse_tracks(lines(text))
    assert format_tracks(parsed) == text
    assert [len(o.tracks) for o in parsed] == [len(o.tracks) for o in out]
    assert parsed[0].frame_index == 0 and parsed[0].tracks == []


def test_config_round_trip():
    cfg = default_config()
    assert load_config() == cfg
    entries = parse_key_values(lines(format_config(cfg)))
    assert apply_config_entries(cfg, entries) == cfg


def test_config_file_and_environment(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text(
        "# tuned\n"
        "tracker.solver = greedy\n"
        "tracker.max_age = 30  # longer memory\n"
        "tracker.adaptive_noise = off\n"
        "sf_threshold.car = 0.2\n"
        "motion_model.ped = cv\n"
    )
    cfg = load_config(str(path), environ={})
    assert cfg.solver is Solver.GREEDY and cfg.max_age == 30 and not cfg.adaptive_noise
    assert cfg.sf_threshold[Category.CAR] == 0.2
    assert cfg.sf_threshold[Category.BUS] == 0.12
    env = {"POLYTRACK_TRACKER__LIFE_CYCLE_MODE": "confidence_latest", "POLYTRACK_TRACKER__MAX_AGE": "5", "OTHER": "x"}
    assert env_overrides(env) == {("tracker", "life_cycle_mode"): "confidence_latest", ("tracker", "max_age"): "5"}
    cfg = load_config(str(path), environ=env)
    assert cfg.max_age == 5 and cfg.life_cycle_mode is LifeCycleMode.CONFIDENCE_LATEST


@pytest.mark.parametrize(
    "line, message",
    [
        ("tracker.bogus = 1", "bogus"),
        ("tracker.solver = simplex", "simplex"),
        ("tracker.max_age = many", "max_age"),
        ("tracker.max_age = 0", "max_age"),
        ("sf_threshold.blimp = 0.1", "blimp"),
        ("nowhere.x = 1", "nowhere"),
    ],
)
def test_bad_config_values(line, message):
    with pytest.raises(ValueError, match=message):
        apply_config_entries(default_config(), parse_key_values([line]))


def test_key_value_syntax_error():
    with pytest.raises(FormatError) as exc:
        parse_key_values(["tracker.max_age = 3", "just words"])
    assert exc.value.line_no == 2


def test_load_scenario(tmp_path):
    path = tmp_path / "scene.txt"
    path.write_text("scenario.n_objects = 3\nscenario.categories = car, ped\nscenario.sigma_pos = 0.25\n")
    spec = load_scenario(str(path), seed=4)
    assert spec == ScenarioSpec(n_objects=3, categories=("car", "ped"), sigma_pos=0.25, seed=4)
    path.write_text("scenario.categories = car, blimp\n")
    with pytest.raises(ValueError, match="blimp"):
        load_scenario(str(path))
