"""Heat lifecycle: spawn two vehicles, step sensing, control and physics at
the control rate, and book-keep progress, passes and terminal events.

One control step runs in this order:

1. clean scan rendered and published on ``/scan`` with both odometries
2. impairment node fed the clean scan; any delivery goes to ``/scan_imp``
3. true forward clearance logged from the clean scan
4. controller step, timed
5. opponent Pure Pursuit command
6. physics substeps, checking vehicle overlap and wall contact on each
7. arclength progress, pass detection and termination
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import bus as topics
from .bus import MessageBus, SimClock
from .config import ScenarioConfig
from .controllers import PurePursuitConfig, pure_pursuit
from .impairments import ImpairmentPipeline
from .lidar import EgoOutOfBounds, simulate_lidar
from .metrics import HeatRecord, unsafe_proximity
from .track import Raceline, Track, load_track
from .vehicle import AckermannCommand, VehicleParams, VehicleState, saturate, step_bicycle, wrap_angle

_TRACKS: dict[str, Track] = {}


def track_for(scenario: ScenarioConfig) -> Track:
    """Tracks are read-only after loading, so heats share one instance."""
    if scenario.track not in _TRACKS:
        _TRACKS[scenario.track] = load_track(scenario.track)
    return _TRACKS[scenario.track]


def opponent_policy(
    state: VehicleState,
    raceline: Raceline,
    speed_factor: float,
    cfg: PurePursuitConfig = PurePursuitConfig(),
    params: VehicleParams = VehicleParams(),
) -> AckermannCommand:
    """Pure Pursuit steering at a fraction of the nearest reference speed."""
    if not 0.0 < speed_factor <= 1.0:
        raise ValueError("speed_factor must lie in (0, 1]")
    steer = pure_pursuit(state, raceline, cfg, params).steering
    s, _, _ = raceline.project(state.x, state.y)
    return saturate(AckermannCommand(steer, speed_factor * float(raceline.speed_at(s))), params)


def measure_runtime(step, *args, **kwargs):
    """Run ``step`` once; return (result, elapsed milliseconds)."""
    t0 = time.perf_counter_ns()
    out = step(*args, **kwargs)
    return out, (time.perf_counter_ns() - t0) * 1e-6


def spawn_states(scenario: ScenarioConfig, raceline: Raceline, rng: np.random.Generator):
    sp = scenario.ego
    s0 = float(rng.uniform(0.0, raceline.length)) if sp.randomize else sp.start_s
    lat = float(rng.uniform(-sp.lateral_jitter, sp.lateral_jitter))
    dpsi = float(rng.uniform(-sp.heading_jitter, sp.heading_jitter))
    x, y = raceline.point_at(s0)
    h = float(raceline.heading_at(s0))
    ego = VehicleState(
        float(x) - lat * math.sin(h), float(y) + lat * math.cos(h), wrap_angle(h + dpsi), sp.initial_speed
    )
    opp = None
    if scenario.opponent.enabled:
        so = raceline.wrap(s0 + scenario.opponent.gap)
        ox, oy = raceline.point_at(so)
        opp = VehicleState(float(ox), float(oy), float(raceline.heading_at(so)), sp.initial_speed)
    return ego, opp


@dataclass
class StepInfo:
    progress: float
    opp_progress: float
    passed_now: bool
    terminal: str | None
    clearance: float


class Heat:
    """One episode's world state. ``sense`` then ``advance`` per control step."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        seed: int,
        heat: int = 0,
        spawn=None,
        track: Track | None = None,
        end_on_pass: bool = True,
    ):
        self.scenario = scenario
        self.seed, self.heat = int(seed), int(heat)
        self.track = track or track_for(scenario)
        self.raceline = self.track.raceline
        self.params = scenario.vehicle
        rng = np.random.default_rng([self.seed, self.heat])
        if spawn is None:
            self.ego, self.opp = spawn_states(scenario, self.raceline, rng)
        else:
            self.ego, self.opp = spawn
        self.imp = ImpairmentPipeline(scenario.impairments, seed=[scenario.impairments.seed, self.seed, self.heat])
        self.clock = SimClock(scenario.control_rate, scenario.physics_substeps)
        self.bus = MessageBus()
        self.events: list = []
        self.clearance: list[float] = []
        self.cross_track = 0.0
        self.ego_s = self.raceline.project(self.ego.x, self.ego.y)[0]
        self.opp_s = self.raceline.project(self.opp.x, self.opp.y)[0] if self.opp is not None else 0.0
        self.ego_prog = 0.0
        self.opp_prog = 0.0
        self.initial_gap = self.raceline.delta_s(self.ego_s, self.opp_s) if self.opp is not None else 0.0
        if self.opp is not None and self.raceline.closed and self.initial_gap < 0:
            self.initial_gap += self.raceline.length
        self.was_behind = False
        self.pass_time: float | None = None
        self.outcome: str | None = None
        self.steps = 0
        self.half_cone = 0.5 * scenario.impairments.cone_fov
        self.end_on_pass = end_on_pass

    @property
    def done(self) -> bool:
        return self.outcome is not None

    @property
    def now(self) -> float:
        return self.clock.sim_time

    @property
    def lead(self) -> float:
        """Ego arclength ahead of the opponent (negative while behind)."""
        return self.ego_prog - (self.opp_prog + self.initial_gap)

    def sense(self) -> float:
        now = self.now
        others = [self.opp] if self.opp is not None else []
        scan = simulate_lidar(self.ego, self.track, others, self.scenario.lidar, now, self.params.collision_radius)
        self.scan = scan
        self.bus.publish(topics.SCAN, now, scan)
        self.bus.publish(topics.EGO_ODOM, now, self.ego)
        if self.opp is not None:
            self.bus.publish(topics.OPP_ODOM, now, self.opp)
        imp = self.imp(scan, now)
        if imp is not None:
            self.bus.publish(topics.SCAN_IMP, imp.stamp, imp)
        c = scan.cone_min(self.half_cone)
        self.clearance.append(c)
        return c

    def _contact(self) -> str | None:
        r = self.params.collision_radius
        if self.opp is not None and math.hypot(self.ego.x - self.opp.x, self.ego.y - self.opp.y) < 2 * r:
            return "collision"
        if self.track.wall_clearance(self.ego.x, self.ego.y) < r:
            return "offtrack"
        return None

    def advance(self, cmd: AckermannCommand) -> StepInfo:
        if self.done:
            raise RuntimeError("heat already finished")
        sc = self.scenario
        cmd = saturate(cmd, self.params)
        opp_cmd = None
        if self.opp is not None:
            opp_cmd = opponent_policy(self.opp, self.raceline, sc.opponent.speed_factor, sc.arbiter.pure_pursuit, self.params)
        dt = self.clock.substep
        terminal = None
        for _ in range(self.clock.physics_substeps):
            self.ego = step_bicycle(self.ego, cmd, self.params, dt)
            if self.opp is not None:
                self.opp = step_bicycle(self.opp, opp_cmd, self.params, dt)
            terminal = self._contact()
            if terminal:
                break
        self.clock.advance()
        self.steps += 1
        now = self.now

        s, lat, _ = self.raceline.project(self.ego.x, self.ego.y)
        dprog = self.raceline.delta_s(self.ego_s, s)
        self.ego_s, self.ego_prog = s, self.ego_prog + dprog
        self.cross_track = max(self.cross_track, abs(lat))
        oprog = 0.0
        if self.opp is not None:
            so, _, _ = self.raceline.project(self.opp.x, self.opp.y)
            oprog = self.raceline.delta_s(self.opp_s, so)
            self.opp_s, self.opp_prog = so, self.opp_prog + oprog

        passed_now = False
        if self.opp is not None:
            if self.lead < 0:
                self.was_behind = True
            if self.pass_time is None and self.was_behind and self.lead > sc.pass_margin:
                self.pass_time = now
                passed_now = True
                self.events.append((now, "pass"))

        if terminal:
            self.events.append((now, terminal))
            self.outcome = terminal
        elif self.opp is None and self.ego_prog >= self.raceline.length:
            self.events.append((now, "lap"))
            self.outcome = "success"
        elif self.end_on_pass and self.pass_time is not None and now - self.pass_time >= sc.grace_window - 1e-9:
            self.outcome = "success"
        elif self.steps >= sc.max_steps:
            self.outcome = "success" if self.pass_time is not None else "timeout"
            self.events.append((now, "timeout"))
        return StepInfo(dprog, oprog, passed_now, terminal, self.clearance[-1] if self.clearance else math.inf)

    def record(self, method: str, runtime_ms, controller_events=()) -> HeatRecord:
        events = sorted(list(self.events) + [tuple(e) for e in controller_events], key=lambda e: e[0])
        return HeatRecord(
            method=method,
            scenario=self.scenario.name,
            p_out=float(self.scenario.impairments.p_out),
            seed=self.seed,
            heat=self.heat,
            outcome=self.outcome or "timeout",
            pass_completed=self.pass_time is not None,
            unsafe_flag=unsafe_proximity(self.clearance),
            steps=self.steps,
            sim_time=self.now,
            min_clearance=float(min(self.clearance)) if self.clearance else math.inf,
            clearance_trace=[float(c) for c in self.clearance],
            runtime_ms=list(runtime_ms),
            events=[[float(t), str(k)] for t, k in events],
            max_cross_track=float(self.cross_track),
            progress=float(self.ego_prog),
        )


def run_heat(scenario: ScenarioConfig, controller, seed: int, heat: int = 0, spawn=None, method: str | None = None) -> HeatRecord:
    """Run one heat to completion with a single high-level controller.

    Raises :class:`EgoOutOfBounds` if the ego starts inside a wall.
    """
    scenario.validate()
    h = Heat(scenario, seed, heat, spawn=spawn)
    controller.reset(seed=[int(seed), int(heat)])
    runtime = []
    while not h.done:
        h.sense()
        cmd, ms = measure_runtime(controller.step, h.bus, h.now)
        runtime.append(ms)
        h.advance(cmd)
    return h.record(method or getattr(controller, "name", "controller"), runtime, getattr(controller, "events", ()))


__all__ = [
    "EgoOutOfBounds",
    "Heat",
    "StepInfo",
    "measure_runtime",
    "opponent_policy",
    "run_heat",
    "spawn_states",
    "track_for",
]
