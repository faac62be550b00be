"""Training loop: rollout collection, normaliser updates, PPO updates,
periodic deterministic evaluation and checkpoint selection.

Log columns (``train_log.csv``)::

    step, eval_reward, eval_success, policy_loss, value_loss, entropy,
    approx_kl, clip_fraction, lr, shaping, episodes
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..arbiter.policy import LOG_2PI, GatePolicy, RunningNormalizer, save_policy
from ..config import ScenarioConfig
from .env import GateEnv, run_episode
from .gae import compute_gae
from .reward import RewardConfig, shaping_weight
from .update import Adam, NonFiniteLoss, PPOHyperparams, RolloutBuffer, UpdateStats, ppo_update

log = logging.getLogger(__name__)

LOG_FIELDS = (
    "step", "eval_reward", "eval_success", "policy_loss", "value_loss", "entropy",
    "approx_kl", "clip_fraction", "lr", "shaping", "episodes",
)
EVAL_SEED_OFFSET = 10_000


class ReturnScaler:
    """Divides rewards by the running std of the discounted return."""

    def __init__(self, gamma: float):
        self.gamma = gamma
        self.ret = 0.0
        self.stats = RunningNormalizer(1)

    def __call__(self, r: float, done: bool) -> float:
        self.ret = self.ret * self.gamma + r
        self.stats.update(np.array([[self.ret]]))
        if done:
            self.ret = 0.0
        return r / float(self.stats.std[0])


@dataclass
class EvalResult:
    mean_reward: float
    success_rate: float
    outcomes: list = field(default_factory=list)


def evaluate(policy: GatePolicy, scenario: ScenarioConfig, reward: RewardConfig, seed: int, episodes: int) -> EvalResult:
    """Deterministic gate, frozen normaliser, no opponent masking, unshaped
    reward, fixed episode seeds."""
    env = GateEnv(scenario, reward, seed=EVAL_SEED_OFFSET + seed, p_mask=0.0)
    norm = policy.normalizer.copy()

    def act(obs):
        return float(policy.mean_action(norm.normalize(obs))[0])

    rets, outs = [], []
    for ep in range(episodes):
        ret, outcome, _ = run_episode(env, act, ep)
        rets.append(ret)
        outs.append(outcome)
    return EvalResult(float(np.mean(rets)), sum(o == "success" for o in outs) / episodes, outs)


@dataclass
class TrainResult:
    best_path: Path
    final_path: Path
    log_rows: list
    best_reward: float


def collect_rollout(env: GateEnv, policy: GatePolicy, n: int, obs_raw, rng, scaler, shaping_fn, step0: int):
    """Gather ``n`` transitions; returns (buffer, next raw obs, episodes ended)."""
    dim = policy.obs_dim
    obs_b = np.zeros((n, dim))
    act_b, logp_b, val_b, rew_b, done_b = (np.zeros(n) for _ in range(5))
    sigma = math.exp(policy.log_std[0])
    episodes = 0
    for t in range(n):
        policy.normalizer.update(obs_raw)
        x = policy.normalizer.normalize(obs_raw)
        mu = float(policy.mean_action(x)[0])
        z = mu + sigma * float(rng.normal())
        obs_b[t] = x
        act_b[t] = z
        logp_b[t] = -0.5 * ((z - mu) / sigma) ** 2 - policy.log_std[0] - 0.5 * LOG_2PI
        val_b[t] = float(policy.value(x)[0])
        out = env.step(z, shaping_fn(step0 + t))
        r = out.reward
        rew_b[t] = scaler(r, out.done) if scaler is not None else r
        done_b[t] = float(out.done)
        if out.done:
            episodes += 1
            obs_raw = env.reset()
        else:
            obs_raw = out.obs
    buf = RolloutBuffer(obs_b, act_b, logp_b, val_b, rew_b, done_b)
    return buf, obs_raw, episodes


def _write_row(path: Path, row: dict, header: bool) -> None:
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        if header:
            w.writeheader()
        w.writerow(row)


def train(
    scenario: ScenarioConfig,
    hp: PPOHyperparams = PPOHyperparams(),
    reward: RewardConfig = RewardConfig(),
    seed: int = 0,
    out_dir: str | Path = "runs/train",
    eval_scenario: ScenarioConfig | None = None,
    hidden=(64, 64),
    progress=None,
) -> TrainResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.csv"
    if log_path.exists():
        log_path.unlink()
    rng = np.random.default_rng([seed, 1])
    policy = GatePolicy(hidden=hidden, seed=seed)
    opt = Adam(policy.named_params(), eps=hp.adam_eps)
    env = GateEnv(scenario, reward, seed=seed)
    eval_sc = eval_scenario or scenario
    scaler = ReturnScaler(hp.gamma) if hp.normalize_reward else None

    def shaping_fn(step):
        return shaping_weight(step, hp.total_steps, reward)

    obs_raw = env.reset()
    step = 0
    episodes = 0
    rows = []
    best_reward = -math.inf
    best_path = out / "best.npz"
    next_eval = hp.eval_every
    next_ckpt = hp.checkpoint_every
    last_stats = UpdateStats()
    header = True
    while step < hp.total_steps:
        n = min(hp.n_steps, hp.total_steps - step)
        buf, obs_raw, ep_done = collect_rollout(env, policy, n, obs_raw, rng, scaler, shaping_fn, step)
        episodes += ep_done
        x_last = policy.normalizer.normalize(obs_raw)
        last_v = float(policy.value(x_last)[0])
        buf.advantages, buf.returns = compute_gae(buf.rewards, buf.values, buf.dones, last_v, hp.gamma, hp.gae_lambda)
        lr = hp.lr_at(1.0 - step / hp.total_steps)
        try:
            last_stats = ppo_update(policy, buf, hp, opt, lr, rng)
        except NonFiniteLoss as exc:
            log.warning("step %d: %s", step, exc)
        step += n
        if step >= next_eval or step >= hp.total_steps:
            ev = evaluate(policy, eval_sc, reward, seed, hp.eval_episodes)
            row = {
                "step": step,
                "eval_reward": ev.mean_reward,
                "eval_success": ev.success_rate,
                "policy_loss": last_stats.policy_loss,
                "value_loss": last_stats.value_loss,
                "entropy": last_stats.entropy,
                "approx_kl": last_stats.approx_kl,
                "clip_fraction": last_stats.clip_fraction,
                "lr": lr,
                "shaping": shaping_fn(step),
                "episodes": episodes,
            }
            rows.append(row)
            _write_row(log_path, row, header)
            header = False
            if progress is not None:
                progress(row)
            if ev.mean_reward > best_reward:
                best_reward = ev.mean_reward
                save_policy(policy, best_path, {"step": step, "eval_reward": ev.mean_reward, "eval_success": ev.success_rate, "seed": seed, "scenario": scenario.name})
            next_eval = (step // hp.eval_every + 1) * hp.eval_every
        if step >= next_ckpt:
            save_policy(policy, out / f"ckpt_{step:08d}.npz", {"step": step, "seed": seed})
            next_ckpt = (step // hp.checkpoint_every + 1) * hp.checkpoint_every
    final_path = save_policy(policy, out / "final.npz", {"step": step, "seed": seed, "scenario": scenario.name})
    if not best_path.exists():
        save_policy(policy, best_path, {"step": step, "seed": seed})
    return TrainResult(best_path, final_path, rows, best_reward)
