import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatedrive.track import Raceline, Track, TrackFormatError, load_track, save_track


def square(closed=True):
    return Raceline([0, 4, 4, 0], [0, 0, 4, 4], [1, 2, 3, 4], closed=closed)


def test_square_length_and_arclength():
    rl = square()
    assert rl.length == pytest.approx(16.0)
    assert np.allclose(rl.s, [0, 4, 8, 12])
    x, y = rl.point_at(14.0)
    assert (float(x), float(y)) == pytest.approx((0.0, 2.0))
    x, y = rl.point_at(18.0)  # wraps
    assert (float(x), float(y)) == pytest.approx((2.0, 0.0))


def test_open_line_clamps():
    rl = square(closed=False)
    assert rl.length == pytest.approx(12.0)
    x, y = rl.point_at(20.0)
    assert (float(x), float(y)) == pytest.approx((0.0, 4.0))


def test_project_sign_convention():
    rl = square()
    s, lat, dist = rl.project(2.0, 0.5)  # inside the loop, left of travel
    assert s == pytest.approx(2.0)
    assert lat == pytest.approx(0.5)
    assert dist == pytest.approx(0.5)
    s, lat, _ = rl.project(2.0, -0.5)
    assert lat == pytest.approx(-0.5)


@given(st.floats(0, 16), st.floats(0, 16))
def test_delta_s_short_way_round(a, b):
    d = square().delta_s(a, b)
    assert -8.0 - 1e-9 <= d <= 8.0 + 1e-9
    assert math.isclose((a + d - b) % 16.0 % 16.0, 0.0, abs_tol=1e-9) or math.isclose((a + d - b) % 16.0, 16.0, abs_tol=1e-9)


def test_curvature_of_circle():
    t = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
    rl = Raceline(5 * np.cos(t), 5 * np.sin(t), np.ones_like(t))
    k = rl.curvature_at(np.array([1.0, 10.0, 20.0]))
    assert np.allclose(k, 0.2, atol=1e-3)


def test_bad_racelines_rejected():
    with pytest.raises(ValueError):
        Raceline([0, 1], [0, 1], [1, 1])
    with pytest.raises(ValueError):
        Raceline([0, 0, 1], [0, 0, 1], [1, 1, 1])


@pytest.mark.parametrize("name", ["oval", "chicane", "straight"])
def test_bundled_tracks_are_drivable(name):
    tr = load_track(name)
    rl = tr.raceline
    s = np.linspace(0, rl.length, 200, endpoint=False)
    xs, ys = rl.point_at(s)
    clear = [tr.wall_clearance(x, y) for x, y in zip(xs, ys)]
    assert min(clear) > 1.2
    assert np.all(rl.speeds > 0)


def test_round_trip(tmp_path, room):
    grid, line = save_track(room, tmp_path, "r")
    back = load_track(grid)
    assert np.array_equal(back.occupancy, room.occupancy)
    assert back.resolution == room.resolution
    assert back.origin == room.origin
    assert np.allclose(back.raceline.xs, room.raceline.xs)


def test_bad_header(tmp_path, room):
    grid, _ = save_track(room, tmp_path, "r")
    grid.write_text("nonsense\n")
    with pytest.raises(TrackFormatError):
        load_track(grid)


def test_missing_track():
    with pytest.raises(FileNotFoundError):
        load_track("no_such_track")


def test_wall_clearance(room):
    assert room.wall_clearance(5.0, 5.0) == pytest.approx(5.0, abs=0.06)
    assert room.wall_clearance(-0.2, 5.0) == 0.0
    assert room.wall_clearance(100.0, 5.0) == 0.0
    assert room.is_occupied(100.0, 5.0)
