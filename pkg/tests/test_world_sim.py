import json
import math

import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from conftest import boxed, make_world
from stubborn.io import world_to_dict
from stubborn.world_sim import (
    FORWARD,
    STOP,
    TURN_LEFT,
    TURN_RIGHT,
    AgentState,
    DetectorParams,
    SensorParams,
    TargetUnreachable,
    WorldParams,
    distance_to_target,
    exposed_obstacle_cells,
    generate_world,
    gt_view_fraction,
    oracle_shortest_path,
    sample_starts,
    sense_depth,
    sense_detector,
    step,
    visible_cells,
)

QUIET = SensorParams(num_rays=121, range_noise=0.0, p_drop=0.0)


def test_generation_is_deterministic():
    a = json.dumps(world_to_dict(generate_world(7)))
    b = json.dumps(world_to_dict(generate_world(7)))
    assert a == b
    assert a != json.dumps(world_to_dict(generate_world(8)))


def test_only_target_labels_without_distractors():
    p = WorldParams(n_distractors=0, n_other_objects=0, invisible_fraction=0.0, target_category=3)
    w = generate_world(5, p)
    assert set(np.unique(w.labels)) <= {0, 3}
    assert not w.invisible_mask.any()


def test_single_target_instance():
    w = generate_world(11, WorldParams(target_category=5, n_targets=1))
    assert sum(1 for c, _ in w.instances if c == 5) == 1
    assert w.distractor_category == 6


def test_world_structure():
    w = generate_world(3)
    # rim is solid so nothing escapes the map
    assert w.occupancy[0].all() and w.occupancy[-1].all() and w.occupancy[:, 0].all() and w.occupancy[:, -1].all()
    # labeled cells and invisible cells are obstacles
    assert w.occupancy[w.labels > 0].all()
    assert w.occupancy[w.invisible_mask].all()
    assert not (w.invisible_mask & (w.labels > 0)).any()
    frac = w.invisible_mask.sum() / exposed_obstacle_cells(w.occupancy & ~w.invisible_mask).sum()
    assert 0.0 < frac < 0.1


def test_invalid_params():
    with pytest.raises(ValueError):
        generate_world(0, WorldParams(n_rooms=0))
    with pytest.raises(ValueError):
        generate_world(0, WorldParams(target_category=9))


def test_starts_are_valid():
    w = generate_world(2)
    for s in sample_starts(w, 10, np.random.default_rng(0)):
        x, y = w.cell_of(s.x_m, s.y_m)
        assert not w.occupancy[y, x]
        assert oracle_shortest_path(w, s) >= 1.0
        assert s.heading_deg % 30 == 0


# ---------------------------------------------------------------- kinematics


def open_world(n=100):
    return make_world(boxed(n))


def test_forward_in_open_space():
    a, hit = step(open_world(), AgentState(1.0, 1.0, 0.0), FORWARD)
    assert not hit
    assert (a.x_m, a.y_m) == pytest.approx((1.25, 1.0))
    assert a.path_length_m == pytest.approx(0.25) and a.steps_taken == 1


def test_forward_into_wall():
    occ = boxed(100)
    occ[:, 25] = True
    w = make_world(occ)
    a0 = AgentState(1.2, 1.0, 0.0)
    a, hit = step(w, a0, FORWARD)
    assert hit
    assert (a.x_m, a.y_m, a.path_length_m) == (a0.x_m, a0.y_m, 0.0)
    assert a.steps_taken == 1


def test_invisible_obstacle_still_blocks_motion():
    occ = boxed(100)
    occ[:, 25] = True
    inv = np.zeros_like(occ)
    inv[:, 25] = True
    _, hit = step(make_world(occ, invisible=inv), AgentState(1.2, 1.0, 0.0), FORWARD)
    assert hit


def test_turns_and_stop():
    w = open_world()
    a, hit = step(w, AgentState(1.0, 1.0, 0.0), TURN_LEFT)
    assert a.heading_deg == 30.0 and not hit
    a, _ = step(w, a, TURN_RIGHT)
    a, _ = step(w, a, TURN_RIGHT)
    assert a.heading_deg == 330.0
    b, hit = step(w, a, STOP)
    assert (b.x_m, b.y_m, b.heading_deg) == (a.x_m, a.y_m, a.heading_deg) and not hit
    with pytest.raises(ValueError):
        step(w, a, "jump")


def test_heading_convention_north_is_up():
    a, _ = step(open_world(), AgentState(2.0, 2.0, 90.0), FORWARD)
    assert a.y_m == pytest.approx(1.75) and a.x_m == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([FORWARD, TURN_LEFT, TURN_RIGHT]), max_size=60), st.integers(0, 1000))
def test_path_length_is_sum_of_successful_forwards(actions, seed):
    w = generate_world(seed % 4)
    a = sample_starts(w, 1, np.random.default_rng(seed))[0]
    moved = 0
    for act in actions:
        a, hit = step(w, a, act)
        moved += act == FORWARD and not hit
        x, y = w.cell_of(a.x_m, a.y_m)
        assert not w.occupancy[y, x]
    assert a.path_length_m == pytest.approx(0.25 * moved, abs=1e-9)
    assert a.steps_taken == len(actions)


# ---------------------------------------------------------------- sensing


def wall_world():
    occ = boxed(120)
    occ[:, 60:] = True
    return make_world(occ)


def test_depth_to_wall_without_noise():
    s = sense_depth(wall_world(), AgentState(1.0, 3.0, 0.0), np.random.default_rng(0), QUIET)
    assert s.ranges_m[60] == pytest.approx(2.0, abs=1e-9)
    assert s.hit[60] and tuple(s.hit_cells[60]) == (60, 60)
    # off-axis rays see the wall further away
    assert np.all(s.ranges_m[s.hit] >= 2.0 - 1e-9)


def test_invisible_wall_is_transparent():
    occ = boxed(200)
    occ[:, 60:62] = True
    occ[:, 100:] = True
    inv = np.zeros_like(occ)
    inv[:, 60:62] = True
    s = sense_depth(make_world(occ, invisible=inv), AgentState(1.0, 5.0, 0.0), np.random.default_rng(0), QUIET)
    assert s.ranges_m[60] == pytest.approx(4.0, abs=1e-9)


def test_full_dropout():
    s = sense_depth(wall_world(), AgentState(1.0, 3.0, 0.0), np.random.default_rng(0), replace(QUIET, p_drop=1.0))
    assert s.dropout.all() and not s.hit.any()


def test_ray_count_and_fov():
    s = sense_depth(wall_world(), AgentState(1.0, 3.0, 45.0), np.random.default_rng(0), SensorParams())
    assert s.num_rays == 120
    assert s.angles_deg.max() - s.angles_deg.min() == pytest.approx(79.0)


def labeled_world(distractor=False):
    occ = boxed(120)
    labels = np.zeros((120, 120), np.int16)
    occ[50:60, 60:70] = True
    labels[50:60, 60:70] = 2 if distractor else 1
    return make_world(occ, labels=labels, target=1, distractor=2)


def test_detector_high_mode_on_target():
    w = labeled_world()
    a = AgentState(2.0, 2.75, 0.0)
    s = sense_depth(w, a, np.random.default_rng(0), QUIET)
    f = sense_detector(w, a, s, DetectorParams(a_true=50, b_true=5, confusion=0.0), np.random.default_rng(1))
    lab = w.labels[f.cells[:, 1], f.cells[:, 0]]
    assert (lab == 1).any()
    c = f.confidences[lab == 1, 0]
    assert (c > 0.6).all() and (c <= 1).all()
    assert (f.confidences >= 0).all() and (f.confidences <= 1).all()


def test_detector_only_reports_visible_cells():
    w = labeled_world()
    a = AgentState(2.0, 2.75, 180.0)  # facing away
    s = sense_depth(w, a, np.random.default_rng(0), QUIET)
    f = sense_detector(w, a, s, DetectorParams(), np.random.default_rng(1))
    seen = {tuple(c) for c in visible_cells(s)}
    assert {tuple(c) for c in f.cells} == seen
    assert not any(w.labels[y, x] == 1 for x, y in seen)


def test_full_confusion_on_distractor():
    w = labeled_world(distractor=True)
    a = AgentState(2.0, 2.75, 0.0)
    s = sense_depth(w, a, np.random.default_rng(0), QUIET)
    f = sense_detector(w, a, s, DetectorParams(a_true=50, b_true=5, confusion=1.0), np.random.default_rng(1))
    lab = w.labels[f.cells[:, 1], f.cells[:, 0]]
    assert (f.confidences[lab == 2, 0] > 0.6).all()
    f0 = sense_detector(w, a, s, DetectorParams(a_true=50, b_true=5, confusion=0.0), np.random.default_rng(1))
    assert (f0.confidences[lab == 2, 0] < 0.5).all()


# ---------------------------------------------------------------- oracles


def corridor_world(target_xs):
    occ = np.ones((200, 200), bool)
    occ[5, 1:199] = False
    labels = np.zeros((200, 200), np.int16)
    for x in target_xs:
        occ[5, x] = True
        labels[5, x] = 1
    return make_world(occ, labels=labels)


def test_oracle_zero_within_threshold():
    w = corridor_world([100])
    assert oracle_shortest_path(w, AgentState((85 + 0.5) * 0.05, 5.5 * 0.05, 0.0)) == 0.0


def test_oracle_corridor_arithmetic():
    w = corridor_world([100])
    assert oracle_shortest_path(w, AgentState(70.5 * 0.05, 5.5 * 0.05, 0.0)) == pytest.approx(0.5, abs=1e-12)


def test_oracle_takes_nearer_instance():
    w = corridor_world([100, 150])
    start = AgentState(140.5 * 0.05, 5.5 * 0.05, 0.0)
    # 150 - 20 = 130 is the nearest threshold cell
    assert oracle_shortest_path(w, start) == pytest.approx(0.0)
    start = AgentState(170.5 * 0.05 + 0.5, 5.5 * 0.05, 0.0)
    assert oracle_shortest_path(w, start) == pytest.approx(0.5, abs=1e-12)


def test_oracle_unreachable():
    occ = boxed(60)
    occ[:, 30] = True
    labels = np.zeros((60, 60), np.int16)
    occ[10, 50] = True
    labels[10, 50] = 1
    with pytest.raises(TargetUnreachable, match="target unreachable"):
        oracle_shortest_path(make_world(occ, labels=labels), AgentState(0.5, 0.5, 0.0))


def test_distance_to_target():
    w = corridor_world([100])
    assert distance_to_target(w, 100.5 * 0.05, 8.5 * 0.05) == pytest.approx(0.15)


def _scan_with_labels(labels):
    n = len(labels)
    from stubborn.world_sim import DepthScan

    return DepthScan(np.zeros(n), np.ones(n), np.ones(n, bool), np.zeros((n, 2), int), np.asarray(labels), np.empty((0, 2), int), 5.0)


def test_gt_view_fraction_examples():
    w = corridor_world([100])
    assert gt_view_fraction(w, _scan_with_labels([0] * 100)) == 0.0
    assert gt_view_fraction(w, _scan_with_labels([1] * 100)) == 1.0
    f = gt_view_fraction(w, _scan_with_labels([1] + [0] * 99))
    assert f == pytest.approx(0.01) and f >= 0.008
