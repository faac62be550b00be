import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gatedrive.controllers import (
    GapFollowConfig,
    PurePursuitConfig,
    gap_follow,
    plan_gap,
    pure_pursuit,
    pure_pursuit_curvature,
    pure_pursuit_steering,
    runs_of,
    speed_tier,
    to_vehicle_frame,
)
from gatedrive.vehicle import VehicleParams, VehicleState

from conftest import DEG, const_scan, scan_with

finite = st.floats(-5, 5, allow_nan=False)


@given(finite, finite)
def test_curvature_chord_identity(x, y):
    k, ld = pure_pursuit_curvature(x, y)
    if ld < 1e-6:
        assert k == 0.0
        return
    assert k * ld * ld == pytest.approx(2 * y, abs=1e-9)


@given(finite, st.floats(0.01, 5))
def test_mirror_negates_steering(x, y):
    d = pure_pursuit_steering(x, y, 0.33)
    assert pure_pursuit_steering(x, -y, 0.33) == pytest.approx(-d, abs=1e-12)
    assert d > 0


def test_lookahead_clamped():
    cfg = PurePursuitConfig()
    assert cfg.lookahead(0.0) == pytest.approx(0.8)
    assert cfg.lookahead(4.0) == pytest.approx(1.8)
    assert cfg.lookahead(100.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        PurePursuitConfig(lookahead_min=4.0)


def test_vehicle_frame():
    s = VehicleState(1.0, 1.0, math.pi / 2)
    assert to_vehicle_frame(s, 1.0, 3.0) == pytest.approx((2.0, 0.0))
    assert to_vehicle_frame(s, 0.0, 1.0) == pytest.approx((0.0, 1.0))


def test_pure_pursuit_on_raceline_steers_with_curvature(chicane):
    rl = chicane.raceline
    for s in np.linspace(0, rl.length, 40, endpoint=False):
        x, y = rl.point_at(s)
        ego = VehicleState(float(x), float(y), float(rl.heading_at(s)), 2.0)
        cmd = pure_pursuit(ego, rl, PurePursuitConfig(), VehicleParams())
        k = float(rl.curvature_at(s + 0.5))
        if abs(k) > 0.05:
            assert np.sign(cmd.steering) == np.sign(k)
        assert cmd.speed == pytest.approx(float(rl.speed_at(s + PurePursuitConfig().lookahead(2.0))))


def test_runs_of():
    assert runs_of(np.array([0, 1, 1, 0, 1], bool)) == [(1, 3), (4, 5)]
    assert runs_of(np.zeros(3, bool)) == []
    assert runs_of(np.ones(3, bool)) == [(0, 3)]


def test_open_space_goes_straight_fast():
    cmd = gap_follow(const_scan(5.0), GapFollowConfig(), VehicleParams())
    assert abs(cmd.steering) <= 0.25 * DEG + 1e-12
    assert cmd.speed == 4.0


def test_obstacle_left_steers_right():
    scan = scan_with(lambda a: 1.0 if 5 * DEG <= a <= 60 * DEG else 5.0)
    plan = plan_gap(scan, GapFollowConfig())
    assert plan.angle < 0
    cmd = gap_follow(scan, GapFollowConfig(), VehicleParams())
    assert cmd.steering < 0


def test_obstacle_right_steers_left():
    scan = scan_with(lambda a: 1.0 if -60 * DEG <= a <= -5 * DEG else 5.0)
    assert gap_follow(scan, GapFollowConfig(), VehicleParams()).steering > 0


def test_bubble_zeroes_neighbourhood():
    scan = scan_with(lambda a: 1.0 if abs(a) < 0.3 * DEG else 5.0)
    cfg = GapFollowConfig(smoothing_window=1)
    plan = plan_gap(scan, cfg)
    inc = scan.geometry.angle_increment
    half = int(math.floor(cfg.bubble_radius / (1.0 * inc)))
    k = int(np.argmin(np.abs(scan.angles)))
    assert np.all(plan.processed[k - half + 1 : k + half] == 0)


def test_blocked_scan_stops():
    cmd = gap_follow(const_scan(0.1), GapFollowConfig(), VehicleParams())
    assert (cmd.steering, cmd.speed) == (0.0, 0.0)
    assert plan_gap(const_scan(0.1), GapFollowConfig()).no_gap


def test_speed_tiers():
    cfg = GapFollowConfig()
    assert speed_tier(3.5, cfg) == 4.0
    assert speed_tier(2.0, cfg) == 2.0
    assert speed_tier(0.5, cfg) == 1.0


def test_gap_config_validation():
    with pytest.raises(ValueError):
        GapFollowConfig(speed_slow=5.0)
    with pytest.raises(ValueError):
        GapFollowConfig(bubble_radius=0)
