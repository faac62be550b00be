"""Sampling-based receding-horizon baseline.

Each control step enumerates constant-steering candidates, rolls each out
with the lag-free kinematic bicycle, screens the predicted path against the
current scan, scores the survivors and executes the first command of the
cheapest one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import bus as topics
from .arbiter.observation import front_clearance
from .arbiter.runtime import ArbiterRuntimeState, InteractionConfig, interaction_mode
from .bus import MessageBus
from .controllers import PurePursuitConfig, pure_pursuit
from .lidar import LidarScan
from .track import Raceline
from .vehicle import STOP, AckermannCommand, VehicleParams, VehicleState, saturate, step_bicycle

STANDARD = "standard"
INTERACTION = "interaction"


@dataclass(frozen=True)
class CostWeights:
    w_trk: float
    w_delta: float
    w_prog: float
    w_obs: float


@dataclass(frozen=True)
class SamplingMpcConfig:
    horizon: int = 8
    dt: float = 0.1
    m_standard: int = 9
    m_interaction: int = 17
    steer_limit: float = 0.4189
    r_safe: float = 0.55
    span_standard: float = 0.2
    span_interaction: float = 0.4189
    weights_standard: CostWeights = CostWeights(1.0, 0.1, 0.5, 0.5)
    weights_interaction: CostWeights = CostWeights(0.3, 0.05, 0.5, 2.0)
    obstacle_radius: float = 1.2
    j_penalty: float = 1e6
    interaction_speed_floor: float = 0.5
    return_eps: float = 1e-3
    interaction: InteractionConfig = InteractionConfig()
    front_fov: float = math.radians(40.0)
    front_percentile: float = 5.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for m in (self.m_standard, self.m_interaction):
            if m < 1 or m % 2 == 0:
                raise ValueError("candidate counts must be odd")
        if self.dt <= 0 or self.r_safe <= 0 or self.steer_limit <= 0:
            raise ValueError("dt, r_safe and steer_limit must be positive")

    def count(self, mode: str) -> int:
        return self.m_interaction if mode == INTERACTION else self.m_standard

    def span(self, mode: str) -> float:
        return self.span_interaction if mode == INTERACTION else self.span_standard

    def weights(self, mode: str) -> CostWeights:
        return self.weights_interaction if mode == INTERACTION else self.weights_standard


@dataclass(eq=False)
class CandidateTrajectory:
    steering: float
    positions: np.ndarray  # (N+1, 2) world frame
    speed: float
    c_min: float = math.inf
    feasible: bool = True
    cost: float = math.nan


def generate_candidates(mode: str, center: float, cfg: SamplingMpcConfig) -> np.ndarray:
    lim = cfg.steer_limit
    if abs(center) > lim + 1e-12:
        raise ValueError("candidate centre outside steering limits")
    span = cfg.span(mode)
    return np.clip(np.linspace(center - span, center + span, cfg.count(mode)), -lim, lim)


def rollout_speed(state: VehicleState, reference_speed: float, mode: str, cfg: SamplingMpcConfig) -> float:
    v = min(state.speed, reference_speed)
    if mode == INTERACTION:
        v = max(v, cfg.interaction_speed_floor)
    return v


def rollout(state: VehicleState, delta: float, speed: float, cfg: SamplingMpcConfig, params: VehicleParams) -> CandidateTrajectory:
    p = params.without_lag()
    cmd = AckermannCommand(delta, speed)
    s = VehicleState(state.x, state.y, state.heading, speed, delta)
    pts = np.empty((cfg.horizon + 1, 2))
    pts[0] = s.x, s.y
    for k in range(1, cfg.horizon + 1):
        s = step_bicycle(s, cmd, p, cfg.dt)
        pts[k] = s.x, s.y
    return CandidateTrajectory(delta, pts, speed)


def scan_points(scan: LidarScan, eps: float = 1e-3) -> np.ndarray:
    """Scan returns short of max range as (x, y) points in the sensor frame."""
    keep = scan.ranges < scan.range_max - eps
    r, a = scan.ranges[keep], scan.angles[keep]
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def to_ego_frame(points: np.ndarray, ego: VehicleState) -> np.ndarray:
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    d = points - np.array([ego.x, ego.y])
    return np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])


def screen_clearance(traj: CandidateTrajectory, scan: LidarScan, ego: VehicleState, cfg: SamplingMpcConfig, points=None):
    """Minimum distance from any predicted point to any scan return."""
    if points is None:
        points = scan_points(scan, cfg.return_eps)
    if points.shape[0] == 0:
        c_min = math.inf
    else:
        path = to_ego_frame(traj.positions, ego)
        diff = path[:, None, :] - points[None, :, :]
        c_min = float(np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff))))
    feasible = c_min >= cfg.r_safe
    traj.c_min, traj.feasible = c_min, feasible
    return feasible, c_min


def obstacle_penalty(c_min: float, radius: float) -> float:
    return max(0.0, radius - c_min) ** 2


def reference_points(raceline: Raceline, s0: float, speed: float, cfg: SamplingMpcConfig) -> np.ndarray:
    s = s0 + speed * cfg.dt * np.arange(cfg.horizon + 1)
    x, y = raceline.point_at(s)
    return np.column_stack([x, y])


def cost(traj: CandidateTrajectory, raceline: Raceline, s0: float, cfg: SamplingMpcConfig, mode: str, reference=None) -> float:
    if not traj.feasible:
        traj.cost = cfg.j_penalty
        return traj.cost
    w = cfg.weights(mode)
    if reference is None:
        reference = reference_points(raceline, s0, traj.speed, cfg)
    err = traj.positions - reference
    s_end, _, _ = raceline.project(*traj.positions[-1])
    prog = raceline.delta_s(s0, s_end)
    j = (
        w.w_trk * float(np.sum(err * err))
        + w.w_delta * traj.steering**2
        - w.w_prog * prog
        + w.w_obs * obstacle_penalty(traj.c_min, cfg.obstacle_radius)
    )
    traj.cost = j
    return j


@dataclass
class MpcDecision:
    mode: str
    center: float
    candidates: list = field(default_factory=list)
    best: int | None = None
    command: AckermannCommand = STOP


def select(candidates: list[CandidateTrajectory], center: float) -> int | None:
    """Index of the cheapest feasible candidate; ties go to the one nearest
    the centre, then to the lower index."""
    best, key = None, None
    for i, c in enumerate(candidates):
        if not c.feasible:
            continue
        k = (c.cost, abs(c.steering - center), i)
        if key is None or k < key:
            best, key = i, k
    return best


def mpc_plan(
    ego: VehicleState,
    scan: LidarScan,
    raceline: Raceline,
    cfg: SamplingMpcConfig,
    params: VehicleParams,
    mode: str = STANDARD,
    pp_cfg: PurePursuitConfig = PurePursuitConfig(),
) -> MpcDecision:
    s0, _, _ = raceline.project(ego.x, ego.y)
    v_ref = float(raceline.speed_at(s0))
    if mode == INTERACTION:
        center = 0.0
    else:
        center = float(np.clip(pure_pursuit(ego, raceline, pp_cfg, params).steering, -cfg.steer_limit, cfg.steer_limit))
    deltas = generate_candidates(mode, center, cfg)
    v = rollout_speed(ego, v_ref, mode, cfg)
    pts = scan_points(scan, cfg.return_eps)
    ref = reference_points(raceline, s0, v, cfg)
    cands = []
    for d in deltas:
        traj = rollout(ego, float(d), v, cfg, params)
        screen_clearance(traj, scan, ego, cfg, points=pts)
        cost(traj, raceline, s0, cfg, mode, reference=ref)
        cands.append(traj)
    dec = MpcDecision(mode, center, cands)
    dec.best = select(cands, center)
    if dec.best is not None:
        dec.command = saturate(AckermannCommand(cands[dec.best].steering, v_ref), params)
    return dec


def mpc_step(ego, scan, raceline, cfg: SamplingMpcConfig, params: VehicleParams, mode: str = STANDARD) -> AckermannCommand:
    return mpc_plan(ego, scan, raceline, cfg, params, mode).command


class SamplingMpc:
    """Controller handle running the baseline on the same bus inputs as the
    arbiter, with the same interaction detector."""

    name = "mpc"

    def __init__(self, raceline: Raceline, params: VehicleParams = VehicleParams(), cfg: SamplingMpcConfig = SamplingMpcConfig(), scan_topic: str = topics.SCAN_IMP, debug_path=None):
        self.raceline, self.params, self.cfg = raceline, params, cfg
        self.scan_topic = scan_topic
        self.debug_path = debug_path
        self._debug = None
        self.reset()

    def reset(self, seed=0) -> None:
        self.detector = ArbiterRuntimeState()
        self.events = self.detector.events
        self.last = None
        if self._debug is not None:
            self._debug.close()
            self._debug = None
        if self.debug_path is not None:
            self._debug = open(self.debug_path, "a")

    def step(self, bus: MessageBus, now: float) -> AckermannCommand:
        ego = bus.payload(topics.EGO_ODOM)
        scan = bus.payload(self.scan_topic)
        opp = bus.payload(topics.OPP_ODOM)
        if scan is None:
            cmd = STOP
        else:
            d_front = front_clearance(scan, self.cfg.front_fov, self.cfg.front_percentile)
            d_opp = math.hypot(opp.x - ego.x, opp.y - ego.y) if opp is not None else math.inf
            was = self.detector.interaction
            obs = np.zeros(10)
            obs[5], obs[6] = d_front, d_opp
            active = interaction_mode(self.detector, obs, self.cfg.interaction, opp is not None)
            if active != was:
                self.events.append((now, "interaction_on" if active else "interaction_off"))
            dec = mpc_plan(ego, scan, self.raceline, self.cfg, self.params, INTERACTION if active else STANDARD)
            if dec.best is None:
                self.events.append((now, "all_infeasible"))
            self.last = dec
            cmd = dec.command
            if self._debug is not None:
                self._dump(now, dec)
        bus.publish(topics.DRIVE, now, cmd)
        return cmd

    def _dump(self, now: float, dec: MpcDecision) -> None:
        rec = {
            "t": now,
            "mode": dec.mode,
            "best": dec.best,
            "candidates": [
                {"steering": c.steering, "c_min": None if math.isinf(c.c_min) else c.c_min, "feasible": c.feasible, "cost": c.cost, "path": c.positions.round(4).tolist()}
                for c in dec.candidates
            ],
        }
        self._debug.write(json.dumps(rec) + "\n")
