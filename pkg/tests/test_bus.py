import math

import pytest

from gatedrive.bus import MessageBus, SimClock, StampOrderError


def test_latest_and_age():
    b = MessageBus()
    assert b.latest("/x") is None
    assert b.payload("/x") is None
    assert b.age("/x", 1.0) == math.inf
    b.publish("/x", 0.5, "a")
    b.publish("/x", 0.5, "b")
    assert b.payload("/x") == "b"
    assert b.age("/x", 0.8) == pytest.approx(0.3)
    assert b.counts["/x"] == 2


def test_stamps_cannot_go_back():
    b = MessageBus()
    b.publish("/x", 1.0, 1)
    with pytest.raises(StampOrderError):
        b.publish("/x", 0.9, 2)


def test_clock_is_exact_on_ticks():
    c = SimClock(30.0, 4)
    for _ in range(3000):
        c.advance()
    assert c.sim_time == 100.0
    assert c.substep == pytest.approx(1 / 120)
    with pytest.raises(ValueError):
        SimClock(0.0)
