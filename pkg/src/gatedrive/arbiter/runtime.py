"""Deployment-time fusion: gate smoothing, interaction-mode gating, convex
command fusion and the safety override, composed by :class:`ArbiterStack`."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import bus as topics
from ..bus import MessageBus
from ..controllers import GapFollowConfig, PurePursuitConfig, gap_follow, pure_pursuit
from ..track import Raceline
from ..vehicle import STOP, AckermannCommand, VehicleParams, saturate
from .observation import IDX, MaskConfig, ObservationConfig, build_observation, draw_mask, mask_opponent
from .policy import GatePolicy, NonFiniteActivation, gate_forward


@dataclass(frozen=True)
class InteractionConfig:
    activate_dist: float = 3.0
    headway_dist: float = 5.0
    n_on: int = 3
    n_off: int = 10

    def __post_init__(self):
        if self.n_on < 1 or self.n_off < 1:
            raise ValueError("hysteresis counts must be >= 1")


@dataclass(frozen=True)
class SafetyConfig:
    c_min: float = 0.25
    tau_max: float = 0.5
    cone_fov: float = math.radians(40.0)

    def __post_init__(self):
        if self.c_min <= 0 or self.tau_max <= 0:
            raise ValueError("c_min and tau_max must be positive")


@dataclass
class ArbiterRuntimeState:
    beta_lpf: float = 0.3
    alpha_bar: float = 0.0
    interaction: bool = False
    on_streak: int = 0
    off_streak: int = 0
    last_scan_stamp: float = -math.inf
    last_odom_stamp: float = -math.inf
    events: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.beta_lpf <= 1.0:
            raise ValueError("beta_lpf must lie in (0, 1]")


def smooth_gate(state: ArbiterRuntimeState, alpha: float) -> float:
    state.alpha_bar = (1.0 - state.beta_lpf) * state.alpha_bar + state.beta_lpf * alpha
    return state.alpha_bar


def is_constrained(d_front: float, d_opp: float, cfg: InteractionConfig, opponent_known: bool = True) -> bool:
    headway = d_opp < cfg.headway_dist if opponent_known else True
    return d_front < cfg.activate_dist and headway


def is_clear(d_front: float, d_opp: float, cfg: InteractionConfig, opponent_known: bool = True) -> bool:
    headway = d_opp >= cfg.headway_dist if opponent_known else True
    return d_front >= cfg.activate_dist and headway


def interaction_mode(state: ArbiterRuntimeState, obs: np.ndarray, cfg: InteractionConfig, opponent_known: bool = True) -> bool:
    """Hysteresis indicator: on after ``n_on`` consecutive constrained steps,
    off after ``n_off`` consecutive clear steps."""
    d_front, d_opp = float(obs[IDX["d_front"]]), float(obs[IDX["d_opp"]])
    if not state.interaction:
        state.on_streak = state.on_streak + 1 if is_constrained(d_front, d_opp, cfg, opponent_known) else 0
        if state.on_streak >= cfg.n_on:
            state.interaction, state.on_streak, state.off_streak = True, 0, 0
    else:
        state.off_streak = state.off_streak + 1 if is_clear(d_front, d_opp, cfg, opponent_known) else 0
        if state.off_streak >= cfg.n_off:
            state.interaction, state.on_streak, state.off_streak = False, 0, 0
    return state.interaction


def blend(u_pp: AckermannCommand, u_gf: AckermannCommand, alpha: float) -> AckermannCommand:
    """Convex combination, before saturation."""
    if alpha == 0.0:
        return u_pp
    if alpha == 1.0:
        return u_gf
    return AckermannCommand(
        (1.0 - alpha) * u_pp.steering + alpha * u_gf.steering,
        (1.0 - alpha) * u_pp.speed + alpha * u_gf.speed,
    )


def fuse(u_pp: AckermannCommand, u_gf: AckermannCommand, alpha_exec: float, params: VehicleParams) -> AckermannCommand:
    if not 0.0 <= alpha_exec <= 1.0:
        raise ValueError("alpha_exec must lie in [0, 1]")
    return saturate(blend(u_pp, u_gf, alpha_exec), params)


def safety_override(
    cmd: AckermannCommand, c_t: float, now: float, state: ArbiterRuntimeState, cfg: SafetyConfig
) -> AckermannCommand:
    """Stop on low forward clearance or stale scan/odometry."""
    stale = max(now - state.last_scan_stamp, now - state.last_odom_stamp)
    if c_t < cfg.c_min:
        state.events.append((now, "override_clearance"))
        return STOP
    if stale > cfg.tau_max:
        state.events.append((now, "override_stale"))
        return STOP
    return cmd


@dataclass(frozen=True)
class ArbiterConfig:
    pure_pursuit: PurePursuitConfig = PurePursuitConfig()
    gap_follow: GapFollowConfig = GapFollowConfig()
    observation: ObservationConfig = ObservationConfig()
    mask: MaskConfig = MaskConfig()
    interaction: InteractionConfig = InteractionConfig()
    safety: SafetyConfig = SafetyConfig()
    beta_lpf: float = 0.3
    scan_topic: str = topics.SCAN_IMP

    @property
    def lidar_only(self) -> bool:
        return self.mask.p_mask >= 1.0


@dataclass
class StepContext:
    """Everything the gate decision needs, captured before the policy runs."""

    now: float
    u_pp: AckermannCommand
    u_gf: AckermannCommand | None
    obs: np.ndarray | None
    obs_masked: np.ndarray | None
    c_t: float
    opponent_known: bool


class ConstantGate:
    """Stand-in policy that always emits the same logit."""

    def __init__(self, z: float):
        self.z = float(z)


class ArbiterStack:
    """Pure Pursuit + Gap Follow fused by the learned gate.

    ``step`` runs the whole deployed pipeline; ``observe``/``act`` split it
    around the policy call so the trainer can supply sampled gate actions.
    """

    name = "arbiter"

    def __init__(self, raceline: Raceline, policy, params: VehicleParams = VehicleParams(), cfg: ArbiterConfig = ArbiterConfig(), seed=0):
        self.raceline = raceline
        self.policy = policy
        self.params = params
        self.cfg = cfg
        self.reset(seed)

    def reset(self, seed=0) -> None:
        self.state = ArbiterRuntimeState(beta_lpf=self.cfg.beta_lpf)
        self.rng = np.random.default_rng(seed)
        self.last = {}

    @property
    def events(self):
        return self.state.events

    def observe(self, bus: MessageBus, now: float) -> StepContext:
        ego_msg = bus.latest(topics.EGO_ODOM)
        scan_msg = bus.latest(self.cfg.scan_topic)
        opp = bus.payload(topics.OPP_ODOM)
        if ego_msg is not None:
            self.state.last_odom_stamp = ego_msg.stamp
        ego = ego_msg.payload
        u_pp = pure_pursuit(ego, self.raceline, self.cfg.pure_pursuit, self.params)
        bus.publish(topics.PP_CMD, now, u_pp)
        if scan_msg is None:
            return StepContext(now, u_pp, None, None, None, math.inf, opp is not None)
        scan = scan_msg.payload
        self.state.last_scan_stamp = scan.stamp
        u_gf = gap_follow(scan, self.cfg.gap_follow, self.params)
        bus.publish(topics.GF_CMD, now, u_gf)
        obs = build_observation(ego, self.raceline, scan, opp, self.cfg.observation, self.cfg.mask)
        m = draw_mask(self.rng, self.cfg.mask.p_mask)
        obs_masked = mask_opponent(obs, m, self.cfg.mask)
        c_t = scan.cone_min(0.5 * self.cfg.safety.cone_fov)
        known = opp is not None and not self.cfg.lidar_only
        return StepContext(now, u_pp, u_gf, obs, obs_masked, c_t, known)

    def decide(self, ctx: StepContext, deterministic: bool = True) -> tuple[float, float]:
        """Gate value and logit from the policy for an observed context."""
        if isinstance(self.policy, ConstantGate):
            z = self.policy.z
            return 1.0 / (1.0 + math.exp(-z)), z
        x = self.policy.normalizer.normalize(ctx.obs_masked)
        alpha, z, _ = gate_forward(self.policy, x, deterministic=deterministic, rng=self.rng)
        return alpha, z

    def act(self, ctx: StepContext, alpha: float) -> AckermannCommand:
        st = self.state
        if ctx.obs is None:
            return safety_override(STOP, ctx.c_t, ctx.now, st, self.cfg.safety)
        alpha_bar = smooth_gate(st, alpha)
        was = st.interaction
        active = interaction_mode(st, ctx.obs_masked, self.cfg.interaction, ctx.opponent_known)
        if active != was:
            st.events.append((ctx.now, "interaction_on" if active else "interaction_off"))
        alpha_exec = alpha_bar if active else 0.0
        fused = fuse(ctx.u_pp, ctx.u_gf, alpha_exec, self.params)
        out = safety_override(fused, ctx.c_t, ctx.now, st, self.cfg.safety)
        self.last = {"alpha": alpha, "alpha_bar": alpha_bar, "interaction": active, "alpha_exec": alpha_exec, "fused": fused}
        return out

    def step(self, bus: MessageBus, now: float) -> AckermannCommand:
        ctx = self.observe(bus, now)
        if ctx.obs is None:
            cmd = self.act(ctx, 0.0)
        else:
            try:
                alpha, _ = self.decide(ctx)
            except NonFiniteActivation:
                self.state.events.append((now, "fault_nonfinite"))
                cmd = STOP
            else:
                cmd = self.act(ctx, alpha)
        bus.publish(topics.DRIVE, now, cmd)
        return cmd


class PurePursuitOnly:
    """Reference tracker alone, for nominal tracking checks."""

    name = "pure_pursuit"

    def __init__(self, raceline: Raceline, params: VehicleParams = VehicleParams(), cfg: PurePursuitConfig = PurePursuitConfig()):
        self.raceline, self.params, self.cfg = raceline, params, cfg
        self.events = []

    def reset(self, seed=0) -> None:
        self.events = []

    def step(self, bus: MessageBus, now: float) -> AckermannCommand:
        cmd = pure_pursuit(bus.payload(topics.EGO_ODOM), self.raceline, self.cfg, self.params)
        bus.publish(topics.DRIVE, now, cmd)
        return cmd
