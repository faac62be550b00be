import math

import numpy as np
import pytest

from gatedrive.lidar import LidarGeometry, LidarScan
from gatedrive.track import empty_room, load_track


@pytest.fixture(scope="session")
def chicane():
    return load_track("chicane")


@pytest.fixture(scope="session")
def oval():
    return load_track("oval")


@pytest.fixture(scope="session")
def straight():
    return load_track("straight")


@pytest.fixture(scope="session")
def room():
    return empty_room()


def const_scan(value=5.0, geom=None, stamp=0.0):
    geom = geom or LidarGeometry()
    return LidarScan(stamp, np.full(geom.beam_count, float(value)), geom)


def scan_with(ranges_fn, geom=None, stamp=0.0):
    """Scan whose range at each beam is ``ranges_fn(angle)``."""
    geom = geom or LidarGeometry()
    return LidarScan(stamp, np.array([ranges_fn(a) for a in geom.angles], dtype=float), geom)


DEG = math.pi / 180.0


# acceptance lines collected during the run and repeated in the summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
