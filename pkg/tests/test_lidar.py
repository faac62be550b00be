import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatedrive.lidar import EgoOutOfBounds, LidarGeometry, LidarScan, simulate_lidar
from gatedrive.vehicle import VehicleState


def test_geometry_defaults():
    g = LidarGeometry()
    assert g.beam_count == 1080
    assert g.fov == pytest.approx(math.radians(270))
    assert g.angles[0] == pytest.approx(-0.75 * math.pi)
    assert len(g.angles) == 1080
    cone = g.cone_indices(math.radians(20))
    assert np.all(np.abs(g.angles[cone]) <= math.radians(20) + 1e-12)
    # 0.25 degree spacing with a beam at exactly 0: 80 each side plus centre
    assert cone.size == 161


def test_scan_length_checked():
    with pytest.raises(ValueError):
        LidarScan(0.0, np.ones(10), LidarGeometry())


def test_room_centre_ranges(room):
    g = LidarGeometry()
    scan = simulate_lidar(VehicleState(5.0, 5.0, 0.0), room, [], g, 0.0)
    fwd = scan.ranges[np.argmin(np.abs(g.angles))]
    assert fwd == pytest.approx(5.0, abs=0.06)
    left = scan.ranges[np.argmin(np.abs(g.angles - math.pi / 2))]
    assert left == pytest.approx(5.0, abs=0.06)
    diag = scan.ranges[np.argmin(np.abs(g.angles - math.pi / 4))]
    assert diag == pytest.approx(min(5 * math.sqrt(2), 10.0), abs=0.1)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 9.0), st.floats(1.0, 9.0), st.floats(-math.pi, math.pi))
def test_ranges_never_exceed_true_wall_distance(room, x, y, h):
    # the forward beam cannot pass the axis-aligned wall it points toward
    g = LidarGeometry()
    scan = simulate_lidar(VehicleState(x, y, h), room, [], g, 0.0)
    assert np.all(scan.ranges >= g.range_min)
    assert np.all(scan.ranges <= g.range_max)
    c, s = math.cos(h), math.sin(h)
    tx = ((10.0 - x) / c if c > 1e-9 else (-x / c if c < -1e-9 else math.inf))
    ty = ((10.0 - y) / s if s > 1e-9 else (-y / s if s < -1e-9 else math.inf))
    fwd = scan.ranges[np.argmin(np.abs(g.angles))]
    assert fwd <= min(tx, ty, g.range_max) + 0.08


def test_disk_occludes(room):
    g = LidarGeometry()
    other = VehicleState(7.0, 5.0, 0.0)
    scan = simulate_lidar(VehicleState(5.0, 5.0, 0.0), room, [other], g, 0.0, other_radius=0.25)
    assert scan.ranges[np.argmin(np.abs(g.angles))] == pytest.approx(1.75, abs=1e-6)


def test_ego_in_wall_raises(room):
    with pytest.raises(EgoOutOfBounds):
        simulate_lidar(VehicleState(-0.1, 5.0, 0.0), room, [], LidarGeometry(), 0.0)


def test_cone_min_and_same_as():
    g = LidarGeometry()
    r = np.full(g.beam_count, 5.0)
    r[540] = 1.0
    a = LidarScan(0.0, r, g)
    assert a.cone_min(math.radians(20)) == 1.0
    assert a.same_as(LidarScan(0.0, r.copy(), g))
    assert not a.same_as(LidarScan(0.1, r.copy(), g))
