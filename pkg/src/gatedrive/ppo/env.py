"""Single-agent training environment around one heat.

The action is the gate logit z. Episodes run until collision, off-track or
the heat timeout; a completed pass earns its bonus but does not end the
episode, so earlier passes leave more time for progress.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..arbiter.policy import sigmoid
from ..arbiter.runtime import ArbiterStack, ConstantGate
from ..config import ScenarioConfig
from ..sim import Heat, track_for
from .reward import RewardConfig, RewardContext, base_reward, reference_gate


@dataclass
class EnvStep:
    obs: np.ndarray | None
    reward: float  # shaped
    base: float  # unshaped
    done: bool
    outcome: str | None
    passed: bool


class GateEnv:
    def __init__(self, scenario: ScenarioConfig, reward: RewardConfig = RewardConfig(), seed: int = 0, p_mask: float | None = None):
        if p_mask is not None:
            arb = replace(scenario.arbiter, mask=replace(scenario.arbiter.mask, p_mask=p_mask))
            scenario = replace(scenario, arbiter=arb)
        self.scenario = scenario
        self.reward_cfg = reward
        self.seed = int(seed)
        self.track = track_for(scenario)
        self.episode = -1
        self.heat: Heat | None = None

    def reset(self, episode: int | None = None) -> np.ndarray:
        self.episode = self.episode + 1 if episode is None else int(episode)
        sc = self.scenario
        self.heat = Heat(sc, self.seed, self.episode, track=self.track, end_on_pass=False)
        self.stack = ArbiterStack(self.track.raceline, ConstantGate(0.0), sc.vehicle, sc.arbiter, seed=[self.seed, self.episode, 7])
        self.alpha_prev = 0.0
        self.outcome = None
        self.passed = False
        self._observe()
        return self.obs

    def _observe(self) -> None:
        h = self.heat
        h.sense()
        self.ctx = self.stack.observe(h.bus, h.now)
        if self.ctx.obs is None:
            raise RuntimeError("training environment needs a scan every step")
        self.obs = self.ctx.obs_masked

    def step(self, z: float, shaping: float = 0.0) -> EnvStep:
        h = self.heat
        alpha = float(sigmoid(z))
        alpha_star = reference_gate(self.ctx.obs, self.reward_cfg)
        cmd = self.stack.act(self.ctx, alpha)
        info = h.advance(cmd)
        passed = info.passed_now
        self.passed |= passed
        terminal = info.terminal
        done = terminal is not None or h.steps >= self.scenario.max_steps
        rctx = RewardContext(
            progress=info.progress,
            speed=h.ego.speed,
            alpha=alpha,
            alpha_prev=self.alpha_prev,
            clearance=self.ctx.c_t,
            passed=passed,
            terminal=terminal,
            alpha_star=alpha_star,
        )
        r0 = base_reward(rctx, self.reward_cfg)
        r = r0 - shaping * abs(alpha - alpha_star)
        self.alpha_prev = alpha
        if done:
            self.outcome = terminal or ("success" if self.passed else "timeout")
            return EnvStep(None, r, r0, True, self.outcome, passed)
        self._observe()
        return EnvStep(self.obs, r, r0, False, None, passed)


def run_episode(env: GateEnv, act, episode: int) -> tuple[float, str, int]:
    """Roll one episode with ``act(obs) -> z``; returns (unshaped return,
    outcome, steps)."""
    obs = env.reset(episode)
    total, steps = 0.0, 0
    while True:
        out = env.step(act(obs))
        total += out.base
        steps += 1
        if out.done:
            return total, out.outcome, steps
        obs = out.obs
