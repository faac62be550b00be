import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatedrive import bus as topics
from gatedrive.bus import MessageBus
from gatedrive.config import load_scenario
from gatedrive.lidar import LidarGeometry, LidarScan
from gatedrive.mpc import (
    INTERACTION,
    STANDARD,
    CandidateTrajectory,
    SamplingMpc,
    SamplingMpcConfig,
    generate_candidates,
    mpc_plan,
    obstacle_penalty,
    rollout,
    scan_points,
    screen_clearance,
    select,
)
from gatedrive.vehicle import VehicleParams, VehicleState

from conftest import const_scan, scan_with


def test_defaults_and_config_file_agree():
    cfg = SamplingMpcConfig()
    assert (cfg.horizon, cfg.dt, cfg.m_standard, cfg.m_interaction) == (8, 0.1, 9, 17)
    assert (cfg.r_safe, cfg.steer_limit) == (0.55, 0.4189)
    loaded = load_scenario("eval").mpc
    assert (loaded.horizon, loaded.dt, loaded.m_standard, loaded.m_interaction, loaded.r_safe, loaded.steer_limit) == (8, 0.1, 9, 17, 0.55, 0.4189)


def test_candidates_respect_limits():
    cfg = SamplingMpcConfig()
    for mode, m in ((STANDARD, 9), (INTERACTION, 17)):
        d = generate_candidates(mode, 0.3, cfg)
        assert len(d) == m
        assert np.all(np.abs(d) <= cfg.steer_limit)
    with pytest.raises(ValueError):
        generate_candidates(STANDARD, 1.0, cfg)
    with pytest.raises(ValueError):
        SamplingMpcConfig(m_standard=8)


def test_rollout_straight():
    cfg = SamplingMpcConfig()
    t = rollout(VehicleState(0, 0, 0, 2.0), 0.0, 2.0, cfg, VehicleParams())
    assert t.positions.shape == (9, 2)
    assert t.positions[-1] == pytest.approx([1.6, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_screen_clearance_matches_pairwise(seed):
    rng = np.random.default_rng(seed)
    g = LidarGeometry(beam_count=60)
    r = rng.uniform(0.1, 10.0, g.beam_count)
    scan = LidarScan(0.0, r, g)
    ego = VehicleState(*rng.uniform(-3, 3, 2), float(rng.uniform(-3, 3)), 1.0)
    cfg = SamplingMpcConfig()
    t = rollout(ego, float(rng.uniform(-0.4, 0.4)), 2.0, cfg, VehicleParams())
    _, c_min = screen_clearance(t, scan, ego, cfg)
    pts_local = scan_points(scan, cfg.return_eps)
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    pts = np.column_stack([ego.x + c * pts_local[:, 0] - s * pts_local[:, 1], ego.y + s * pts_local[:, 0] + c * pts_local[:, 1]])
    ref = min(math.dist(p, q) for p in t.positions for q in pts) if len(pts) else math.inf
    assert c_min == pytest.approx(ref, abs=1e-9)
    assert t.feasible == (c_min >= cfg.r_safe)


def test_empty_scan_is_feasible():
    cfg = SamplingMpcConfig()
    t = rollout(VehicleState(0, 0, 0, 1.0), 0.0, 1.0, cfg, VehicleParams())
    ok, c = screen_clearance(t, const_scan(10.0), VehicleState(0, 0, 0, 1.0), cfg)
    assert ok and c == math.inf


def test_select_tie_breaks():
    def c(d, cost, ok=True):
        t = CandidateTrajectory(d, np.zeros((2, 2)), 1.0, feasible=ok)
        t.cost = cost
        return t

    assert select([c(-0.1, 1.0), c(0.1, 1.0)], 0.05) == 1
    assert select([c(-0.1, 1.0), c(0.1, 1.0)], 0.0) == 0
    assert select([c(0.0, 0.0, ok=False), c(0.2, 5.0)], 0.0) == 1
    assert select([c(0.0, 0.0, ok=False)], 0.0) is None


def test_obstacle_penalty():
    assert obstacle_penalty(2.0, 1.2) == 0.0
    assert obstacle_penalty(0.2, 1.2) == pytest.approx(1.0)


def test_straight_open_road_steers_straight(straight):
    rl = straight.raceline
    cfg = SamplingMpcConfig()
    x, y = rl.point_at(8.0)
    ego = VehicleState(float(x), float(y), float(rl.heading_at(8.0)), 2.0)
    dec = mpc_plan(ego, const_scan(10.0), rl, cfg, VehicleParams())
    spacing = 2 * cfg.span_standard / (cfg.m_standard - 1)
    assert abs(dec.command.steering) <= spacing + 1e-12


def test_blocked_ahead_is_infeasible_everywhere(straight):
    rl = straight.raceline
    x, y = rl.point_at(8.0)
    ego = VehicleState(float(x), float(y), float(rl.heading_at(8.0)), 2.0)
    dec = mpc_plan(ego, const_scan(0.3), rl, SamplingMpcConfig(), VehicleParams())
    assert dec.best is None
    assert dec.command.speed == 0.0


def test_controller_handle_and_debug_dump(straight, tmp_path):
    rl = straight.raceline
    x, y = rl.point_at(8.0)
    ego = VehicleState(float(x), float(y), float(rl.heading_at(8.0)), 2.0)
    ctl = SamplingMpc(rl, debug_path=tmp_path / "mpc.jsonl")
    b = MessageBus()
    b.publish(topics.EGO_ODOM, 0.0, ego)
    b.publish(topics.SCAN_IMP, 0.0, const_scan(10.0))
    ctl.step(b, 0.0)
    ctl.reset()
    lines = (tmp_path / "mpc.jsonl").read_text().splitlines()
    assert len(lines) == 1 and '"candidates"' in lines[0]
