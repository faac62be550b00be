import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatedrive.impairments import (
    ImpairmentConfig,
    ImpairmentPipeline,
    ImpairmentState,
    apply_delay_and_dropout,
    apply_noise,
    apply_outliers,
    delay_odometry,
)
from gatedrive.lidar import LidarGeometry

from conftest import const_scan


def test_identity_config_passes_scans_through():
    pipe = ImpairmentPipeline(ImpairmentConfig.disabled())
    s = const_scan(5.0)
    assert pipe(s, 0.0) is s


def test_noise_is_clipped_to_sensor_limits():
    rng = np.random.default_rng(0)
    s = apply_noise(const_scan(9.99), 0.5, rng)
    assert s.ranges.max() <= 10.0
    s = apply_noise(const_scan(0.06), 0.5, rng)
    assert s.ranges.min() >= 0.05
    with pytest.raises(ValueError):
        apply_noise(const_scan(1.0), -1.0, rng)


def test_outliers_count_and_location():
    cfg = ImpairmentConfig(p_out=1.0)
    s, hit = apply_outliers(const_scan(5.0), cfg, np.random.default_rng(1))
    assert hit
    short = np.flatnonzero(s.ranges < 1.0)
    g = LidarGeometry()
    cone = g.cone_indices(0.5 * cfg.cone_fov)
    assert len(short) == int(math.floor(0.12 * cone.size))
    assert set(short) <= set(cone)
    assert np.all(s.ranges[short] == pytest.approx(0.10))


def test_no_outliers_at_zero_rate():
    s, hit = apply_outliers(const_scan(5.0), ImpairmentConfig(p_out=0.0), np.random.default_rng(1))
    assert not hit and np.all(s.ranges == 5.0)


def test_delay_holds_back_scans():
    cfg = ImpairmentConfig(noise_sigma=0.0, delay=0.2, p_drop=0.0)
    st_ = ImpairmentState.fresh(0)
    outs = []
    for k in range(12):
        now = k / 30
        outs.append(apply_delay_and_dropout(const_scan(5.0, stamp=now), now, st_, cfg))
    first = next(i for i, o in enumerate(outs) if o is not None)
    assert first == 6
    for k, o in enumerate(outs[first:], start=first):
        assert k / 30 - o.stamp >= 0.2 - 1e-9


def test_dropout_holds_last_valid():
    cfg = ImpairmentConfig(noise_sigma=0.0, delay=0.0, p_drop=1.0)
    st_ = ImpairmentState.fresh(0)
    a = apply_delay_and_dropout(const_scan(5.0, stamp=0.0), 0.0, st_, cfg)
    b = apply_delay_and_dropout(const_scan(4.0, stamp=0.1), 0.1, st_, cfg)
    assert a.stamp == 0.0 and b is a
    assert st_.holds == 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_same_seed_same_stream(seed):
    cfg = ImpairmentConfig(p_out=0.5)
    a, b = ImpairmentPipeline(cfg, seed=seed), ImpairmentPipeline(cfg, seed=seed)
    for k in range(15):
        sa = a(const_scan(3.0, stamp=k / 30), k / 30)
        sb = b(const_scan(3.0, stamp=k / 30), k / 30)
        assert (sa is None) == (sb is None)
        if sa is not None:
            assert sa.same_as(sb)


def test_odometry_delay_hook():
    cfg = ImpairmentConfig(odom_delay=0.1)
    st_ = ImpairmentState.fresh(0)
    assert delay_odometry("a", 0.0, 0.0, st_, cfg) is None
    assert delay_odometry("b", 0.1, 0.1, st_, cfg) == (0.0, "a")
    assert delay_odometry("x", 0.0, 0.0, st_, ImpairmentConfig()) == (0.0, "x")


def test_config_validation():
    with pytest.raises(ValueError):
        ImpairmentConfig(p_drop=1.5)
    with pytest.raises(ValueError):
        ImpairmentConfig(delay=-0.1)
