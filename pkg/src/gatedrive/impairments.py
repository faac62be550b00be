"""LiDAR stream impairments: range noise, forward-cone false short returns,
FIFO delay and dropout with zero-order hold.

Composition order is fixed: noise, outliers, then delay/dropout, so the
delayed scan is the fully corrupted one.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .lidar import LidarScan

# stamps are tick/rate floats; a scan exactly `delay` old must count as due
STAMP_TOL = 1e-9


@dataclass(frozen=True)
class ImpairmentConfig:
    noise_sigma: float = 0.05
    delay: float = 0.200
    p_drop: float = 0.3
    p_out: float = 0.0
    f_out: float = 0.12
    r_out: float = 0.10
    cone_fov: float = math.radians(40.0)
    seed: int = 0
    # opponent odometry delay hook; unexercised by default
    odom_delay: float = 0.0

    def __post_init__(self):
        for name in ("p_drop", "p_out", "f_out"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.noise_sigma < 0 or self.delay < 0 or self.odom_delay < 0:
            raise ValueError("noise_sigma and delays must be non-negative")

    @classmethod
    def disabled(cls, seed: int = 0) -> "ImpairmentConfig":
        return cls(noise_sigma=0.0, delay=0.0, p_drop=0.0, p_out=0.0, seed=seed)

    @property
    def is_identity(self) -> bool:
        return self.noise_sigma == 0 and self.delay == 0 and self.p_drop == 0 and self.p_out == 0


@dataclass
class ImpairmentState:
    rng: np.random.Generator
    queue: deque = field(default_factory=deque)
    last_valid: LidarScan | None = None
    scans_in: int = 0
    outlier_scans: int = 0
    deliveries: int = 0
    holds: int = 0
    odom_queue: deque = field(default_factory=deque)

    @classmethod
    def fresh(cls, seed) -> "ImpairmentState":
        return cls(rng=np.random.default_rng(seed))


def apply_noise(scan: LidarScan, sigma: float, rng: np.random.Generator) -> LidarScan:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return scan
    noisy = scan.ranges + rng.normal(0.0, sigma, size=scan.ranges.shape)
    return scan.with_ranges(np.clip(noisy, scan.range_min, scan.range_max))


def apply_outliers(scan: LidarScan, cfg: ImpairmentConfig, rng: np.random.Generator) -> tuple[LidarScan, bool]:
    """Returns the (possibly) corrupted scan and whether outliers were injected."""
    fires = rng.random() < cfg.p_out
    if not fires:
        return scan, False
    cone = scan.geometry.cone_indices(0.5 * cfg.cone_fov)
    if cone.size == 0:
        raise ValueError("forward cone contains no beams")
    k = int(math.floor(cfg.f_out * cone.size))
    chosen = rng.choice(cone, size=k, replace=False)
    r = scan.ranges.copy()
    r[chosen] = cfg.r_out
    return scan.with_ranges(np.clip(r, scan.range_min, scan.range_max)), True


def apply_delay_and_dropout(
    scan: LidarScan | None, now: float, state: ImpairmentState, cfg: ImpairmentConfig
) -> LidarScan | None:
    """Queue ``scan`` and emit what the delayed, lossy link delivers at ``now``.

    Delivered scans keep their original stamps, so their age is observable.
    Returns None when nothing becomes due at this tick.
    """
    if scan is not None:
        state.queue.append(scan)
    due = []
    while state.queue and now - state.queue[0].stamp >= cfg.delay - STAMP_TOL:
        due.append(state.queue.popleft())
    if not due:
        return None
    drops = state.rng.random(len(due)) < cfg.p_drop
    newest = due[-1]
    state.deliveries += 1
    if state.last_valid is None or not drops[-1]:
        state.last_valid = newest
        return newest
    state.holds += 1
    return state.last_valid


def impair_stream(
    scan: LidarScan | None, now: float, cfg: ImpairmentConfig, state: ImpairmentState
) -> LidarScan | None:
    if cfg.is_identity:
        if scan is not None:
            state.scans_in += 1
            state.deliveries += 1
            state.last_valid = scan
        return scan
    if scan is not None:
        state.scans_in += 1
        scan = apply_noise(scan, cfg.noise_sigma, state.rng)
        scan, hit = apply_outliers(scan, cfg, state.rng)
        state.outlier_scans += int(hit)
    return apply_delay_and_dropout(scan, now, state, cfg)


def delay_odometry(msg, stamp: float, now: float, state: ImpairmentState, cfg: ImpairmentConfig):
    """Optional pass-through-with-delay for opponent odometry.

    Returns the newest ``(stamp, msg)`` pair that is due, or None.
    """
    if cfg.odom_delay == 0:
        return stamp, msg
    state.odom_queue.append((stamp, msg))
    out = None
    while state.odom_queue and now - state.odom_queue[0][0] >= cfg.odom_delay:
        out = state.odom_queue.popleft()
    return out


class ImpairmentPipeline:
    """One heat's impairment node: config plus its private state."""

    def __init__(self, cfg: ImpairmentConfig, seed=None):
        self.cfg = cfg
        self.state = ImpairmentState.fresh(cfg.seed if seed is None else seed)

    def __call__(self, scan: LidarScan | None, now: float) -> LidarScan | None:
        return impair_stream(scan, now, self.cfg, self.state)

    @property
    def hold_fraction(self) -> float:
        return self.state.holds / max(self.state.deliveries, 1)

    @property
    def outlier_fraction(self) -> float:
        return self.state.outlier_scans / max(self.state.scans_in, 1)
