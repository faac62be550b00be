"""Pure Pursuit reference tracking and LiDAR Gap Follow.

Both controllers are pure functions of their inputs so the arbiter can
query them side by side every control step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from .lidar import LidarScan
from .track import Raceline
from .vehicle import AckermannCommand, VehicleParams, VehicleState, saturate

LOOKAHEAD_FLOOR = 1e-6
# range ties within this many metres count as equal (absorbs filter round-off)
TIE_TOL = 1e-9


@dataclass(frozen=True)
class PurePursuitConfig:
    lookahead_base: float = 0.8
    lookahead_speed_gain: float = 0.25
    lookahead_min: float = 0.8
    lookahead_max: float = 3.0

    def __post_init__(self):
        if min(self.lookahead_base, self.lookahead_speed_gain, self.lookahead_min, self.lookahead_max) <= 0:
            raise ValueError("lookahead parameters must be positive")
        if self.lookahead_min > self.lookahead_max:
            raise ValueError("lookahead_min exceeds lookahead_max")

    def lookahead(self, speed: float) -> float:
        ld = self.lookahead_base + self.lookahead_speed_gain * speed
        return min(max(ld, self.lookahead_min), self.lookahead_max)


def pure_pursuit_curvature(x_d: float, y_d: float) -> tuple[float, float]:
    """Curvature of the arc through the origin and (x_d, y_d), and the
    distance to that point. Returns zero curvature for a degenerate point."""
    ld = math.hypot(x_d, y_d)
    if ld < LOOKAHEAD_FLOOR:
        return 0.0, ld
    theta = math.atan2(y_d, x_d)
    return 2.0 * math.sin(theta) / ld, ld


def pure_pursuit_steering(x_d: float, y_d: float, wheelbase: float) -> float:
    kappa, _ = pure_pursuit_curvature(x_d, y_d)
    return math.atan(wheelbase * kappa)


def to_vehicle_frame(state: VehicleState, x: float, y: float) -> tuple[float, float]:
    dx, dy = x - state.x, y - state.y
    c, s = math.cos(state.heading), math.sin(state.heading)
    return c * dx + s * dy, -s * dx + c * dy


def lookahead_point(ego: VehicleState, raceline: Raceline, cfg: PurePursuitConfig):
    s_near, _, _ = raceline.project(ego.x, ego.y)
    s_look = s_near + cfg.lookahead(ego.speed)
    x, y = raceline.point_at(s_look)
    return float(x), float(y), s_look


def pure_pursuit(
    ego: VehicleState, raceline: Raceline, cfg: PurePursuitConfig, params: VehicleParams
) -> AckermannCommand:
    x, y, s_look = lookahead_point(ego, raceline, cfg)
    x_d, y_d = to_vehicle_frame(ego, x, y)
    delta = pure_pursuit_steering(x_d, y_d, params.wheelbase)
    return saturate(AckermannCommand(delta, float(raceline.speed_at(s_look))), params)


@dataclass(frozen=True)
class GapFollowConfig:
    bubble_radius: float = 0.45
    max_considered_range: float = 4.0
    fov_used: float = math.pi
    speed_fast: float = 4.0
    speed_mid: float = 2.0
    speed_slow: float = 1.0
    clearance_mid: float = 1.5
    clearance_fast: float = 3.0
    smoothing_window: int = 5
    # half-angle of the heading cone whose minimum range sets the speed tier
    speed_cone: float = math.radians(10.0)

    def __post_init__(self):
        if self.bubble_radius <= 0:
            raise ValueError("bubble_radius must be positive")
        if not self.speed_slow < self.speed_mid < self.speed_fast:
            raise ValueError("speed tiers must be increasing")
        if not 0 < self.clearance_mid < self.clearance_fast:
            raise ValueError("clearance thresholds must be increasing")
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")


@dataclass(frozen=True, eq=False)
class GapPlan:
    processed: np.ndarray  # post-bubble ranges, zero outside the fov
    run: tuple[int, int] | None  # chosen gap [start, stop)
    target: int | None
    angle: float
    forward_clearance: float

    @property
    def no_gap(self) -> bool:
        return self.target is None


def runs_of(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, stop) runs of True in a boolean array."""
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]


def _pick_run(runs, angles, reference: float):
    # longest; ties go to the run whose centre angle is nearest `reference`
    def key(r):
        centre = 0.5 * (angles[r[0]] + angles[r[1] - 1])
        return (-(r[1] - r[0]), abs(centre - reference), r[0])

    return min(runs, key=key)


def plan_gap(scan: LidarScan, cfg: GapFollowConfig) -> GapPlan:
    angles = scan.angles
    inc = scan.geometry.angle_increment
    r = np.minimum(scan.ranges, cfg.max_considered_range)
    if cfg.smoothing_window > 1:
        r = uniform_filter1d(r, size=cfg.smoothing_window, mode="nearest")
    in_fov = np.abs(angles) <= 0.5 * cfg.fov_used + 1e-12
    r = np.where(in_fov, r, 0.0)

    fov_idx = np.flatnonzero(in_fov)
    k = int(fov_idx[np.argmin(r[fov_idx])])
    rk = r[k]
    # nothing inside the considered range means nothing to inflate
    if rk < cfg.max_considered_range - TIE_TOL:
        half = len(r) if rk <= 0 else int(math.floor(cfg.bubble_radius / (rk * inc)))
        lo, hi = max(k - half, 0), min(k + half + 1, len(r))
        r[lo:hi] = 0.0

    raw_cone = scan.ranges[np.abs(angles) <= cfg.speed_cone + 1e-12]
    fwd = float(np.min(raw_cone)) if raw_cone.size else 0.0

    runs = runs_of(r > 0)
    if not runs:
        return GapPlan(r, None, None, 0.0, fwd)
    run = _pick_run(runs, angles, 0.0)
    seg = r[run[0] : run[1]]
    best = seg.max()
    blocks = [(run[0] + a, run[0] + b) for a, b in runs_of(seg >= best - TIE_TOL)]
    run_centre = 0.5 * (angles[run[0]] + angles[run[1] - 1])
    block = _pick_run(blocks, angles, run_centre)
    target = (block[0] + block[1] - 1) // 2
    return GapPlan(r, run, target, float(angles[target]), fwd)


def speed_tier(clearance: float, cfg: GapFollowConfig) -> float:
    if clearance >= cfg.clearance_fast:
        return cfg.speed_fast
    if clearance >= cfg.clearance_mid:
        return cfg.speed_mid
    return cfg.speed_slow


def gap_follow(scan: LidarScan, cfg: GapFollowConfig, params: VehicleParams) -> AckermannCommand:
    """Steer at the centre of the deepest stretch of the widest free gap.

    A scan with no free beam left after the safety bubble yields a stop
    command (see :func:`plan_gap` for the flag).
    """
    plan = plan_gap(scan, cfg)
    if plan.no_gap:
        return AckermannCommand(0.0, 0.0)
    return saturate(AckermannCommand(plan.angle, speed_tier(plan.forward_clearance, cfg)), params)
