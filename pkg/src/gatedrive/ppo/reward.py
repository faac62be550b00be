"""Per-step reward with the clearance barrier, and the imitation shaping
term that pulls the gate toward a simple reference during early training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..arbiter.observation import IDX


@dataclass(frozen=True)
class RewardConfig:
    w_prog: float = 1.0
    w_v: float = 0.01
    w_sm: float = 0.05
    w_risk: float = 0.5
    barrier_radius: float = 0.8
    r_pass: float = 5.0
    r_collision: float = -10.0
    r_offtrack: float = -10.0
    shaping_start: float = 0.2
    shaping_fraction: float = 0.3
    d_activate: float = 3.0
    d_full: float = 1.0

    def __post_init__(self):
        for name in ("w_prog", "w_v", "w_sm", "w_risk", "shaping_start"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.barrier_radius <= 0 or self.d_activate <= self.d_full:
            raise ValueError("need barrier_radius > 0 and d_activate > d_full")
        if not 0.0 < self.shaping_fraction <= 1.0:
            raise ValueError("shaping_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class RewardContext:
    progress: float  # signed raceline metres this step
    speed: float
    alpha: float
    alpha_prev: float
    clearance: float
    passed: bool = False
    terminal: str | None = None
    alpha_star: float = 0.0


def barrier(c: float, radius: float) -> float:
    return max(0.0, (radius - c) / radius) ** 2


def reference_gate(obs, cfg: RewardConfig) -> float:
    """Linear ramp from 0 (front clear) to 1 (front blocked)."""
    d = float(obs[IDX["d_front"]])
    return float(np.clip((cfg.d_activate - d) / (cfg.d_activate - cfg.d_full), 0.0, 1.0))


def shaping_weight(step: int, total_steps: int, cfg: RewardConfig) -> float:
    """Linear decay from ``shaping_start`` to zero over the first fraction of training."""
    horizon = cfg.shaping_fraction * total_steps
    if horizon <= 0:
        return 0.0
    return cfg.shaping_start * max(0.0, 1.0 - step / horizon)


def base_reward(ctx: RewardContext, cfg: RewardConfig) -> float:
    r = (
        cfg.w_prog * ctx.progress
        + cfg.w_v * ctx.speed
        - cfg.w_sm * abs(ctx.alpha - ctx.alpha_prev)
        - cfg.w_risk * barrier(ctx.clearance, cfg.barrier_radius)
    )
    if ctx.passed:
        r += cfg.r_pass
    if ctx.terminal == "collision":
        r += cfg.r_collision
    elif ctx.terminal == "offtrack":
        r += cfg.r_offtrack
    return r


def compute_reward(ctx: RewardContext, cfg: RewardConfig, shaping: float = 0.0) -> float:
    return base_reward(ctx, cfg) - shaping * abs(ctx.alpha - ctx.alpha_star)
