"""Clipped-surrogate PPO on the gate policy with hand-written gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..arbiter.policy import LOG_2PI, GatePolicy, mlp_backward, mlp_forward


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass(frozen=True)
class PPOHyperparams:
    total_steps: int = 1_200_000
    n_steps: int = 4096
    batch_size: int = 256
    epochs: int = 5
    gamma: float = 0.99
    gae_lambda: float = 0.98
    clip_range: float = 0.2
    ent_coef: float = 0.02
    vf_coef: float = 0.6
    max_grad_norm: float = 0.7
    target_kl: float = 0.015
    learning_rate: float = 2.4e-4
    eval_every: int = 5000
    eval_episodes: int = 8
    checkpoint_every: int = 25000
    normalize_advantage: bool = True
    normalize_reward: bool = True
    adam_eps: float = 1e-5

    def __post_init__(self):
        for name in ("total_steps", "n_steps", "batch_size", "epochs", "eval_every", "eval_episodes", "checkpoint_every"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("ent_coef", "vf_coef", "max_grad_norm", "target_kl", "learning_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if not 0 < self.clip_range < 1:
            raise ValueError("clip_range must lie in (0, 1)")

    def lr_at(self, progress_remaining: float) -> float:
        """Linear schedule: full rate at the start, zero at the end."""
        return self.learning_rate * max(progress_remaining, 0.0)


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray = field(default=None)
    returns: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class LossParts:
    total: float
    policy: float
    value: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def gaussian_entropy(log_std: float) -> float:
    return 0.5 + 0.5 * LOG_2PI + log_std


def ppo_loss(policy: GatePolicy, obs, actions, old_log_probs, advantages, returns, hp: PPOHyperparams, with_grad: bool = True):
    """Total loss (surrogate + value + entropy) and its gradient.

    Returns ``(LossParts, grads)``; ``grads`` maps the names from
    :meth:`GatePolicy.named_params` to arrays, or is None.
    """
    obs = np.atleast_2d(obs)
    n = obs.shape[0]
    mu, a_cache = mlp_forward(policy.actor, obs)
    v, c_cache = mlp_forward(policy.critic, obs)
    ls = float(policy.log_std[0])
    sigma = math.exp(ls)
    u = (actions - mu) / sigma
    logp = -0.5 * u * u - ls - 0.5 * LOG_2PI
    log_ratio = logp - old_log_probs
    ratio = np.exp(log_ratio)
    eps = hp.clip_range
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    s1, s2 = ratio * advantages, clipped * advantages
    surr = np.minimum(s1, s2)
    l_pol = -float(np.mean(surr))
    l_val = float(np.mean((v - returns) ** 2))
    ent = gaussian_entropy(ls)
    total = l_pol + hp.vf_coef * l_val - hp.ent_coef * ent
    kl = float(np.mean(ratio - 1.0 - log_ratio))
    parts = LossParts(total, l_pol, l_val, ent, kl, float(np.mean(np.abs(ratio - 1.0) > eps)))
    if not with_grad:
        return parts, None
    # the unclipped branch carries the gradient wherever it is the minimum
    active = (s1 <= s2).astype(float)
    dlogp = -active * advantages * ratio / n
    dmu = dlogp * u / sigma
    dls = float(np.sum(dlogp * (u * u - 1.0))) - hp.ent_coef
    dv = hp.vf_coef * 2.0 * (v - returns) / n
    g_actor = mlp_backward(policy.actor, a_cache, dmu)
    g_critic = mlp_backward(policy.critic, c_cache, dv)
    grads = {f"actor/{k}": g for k, g in g_actor.items()}
    grads.update({f"critic/{k}": g for k, g in g_critic.items()})
    grads["log_std"] = np.array([dls])
    return parts, grads


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale in place so the global norm is at most ``max_norm``; returns the
    norm before clipping."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads.values():
            g *= scale
    return norm


class Adam:
    def __init__(self, params: dict[str, np.ndarray], eps: float = 1e-5, betas=(0.9, 0.999)):
        self.params = params
        self.eps = eps
        self.b1, self.b2 = betas
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            p -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)

    def state(self):
        return self.t, {k: v.copy() for k, v in self.m.items()}, {k: v.copy() for k, v in self.v.items()}

    def restore(self, state) -> None:
        self.t, m, v = state
        for k in self.m:
            self.m[k][...] = m[k]
            self.v[k][...] = v[k]


@dataclass
class UpdateStats:
    policy_loss: float = math.nan
    value_loss: float = math.nan
    entropy: float = math.nan
    approx_kl: float = 0.0
    clip_fraction: float = 0.0
    grad_norm: float = 0.0
    minibatches: int = 0
    epochs_run: int = 0
    early_stop: bool = False
    aborted: bool = False


def ppo_update(policy: GatePolicy, buffer: RolloutBuffer, hp: PPOHyperparams, opt: Adam, lr: float, rng: np.random.Generator) -> UpdateStats:
    """Epochs of shuffled minibatch steps; stops early once the approximate
    KL to the data-collecting policy exceeds the target."""
    params = policy.named_params()
    backup = {k: v.copy() for k, v in params.items()}
    opt_backup = opt.state()
    n = len(buffer)
    stats = UpdateStats()
    agg = {"policy": [], "value": [], "entropy": [], "kl": [], "clip": [], "norm": []}
    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            idx = order[start : start + hp.batch_size]
            adv = buffer.advantages[idx]
            if hp.normalize_advantage and len(idx) > 1:
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            parts, grads = ppo_loss(policy, buffer.obs[idx], buffer.actions[idx], buffer.log_probs[idx], adv, buffer.returns[idx], hp)
            if not math.isfinite(parts.total) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                for k, p in params.items():
                    p[...] = backup[k]
                opt.restore(opt_backup)
                stats.aborted = True
                raise NonFiniteLoss("non-finite PPO loss; weights restored")
            if parts.approx_kl > hp.target_kl:
                stats.early_stop = True
                break
            agg["norm"].append(clip_grad_norm(grads, hp.max_grad_norm))
            opt.step(grads, lr)
            stats.minibatches += 1
            agg["policy"].append(parts.policy)
            agg["value"].append(parts.value)
            agg["entropy"].append(parts.entropy)
            agg["kl"].append(parts.approx_kl)
            agg["clip"].append(parts.clip_fraction)
        stats.epochs_run = epoch + 1
        if stats.early_stop:
            break
    if agg["policy"]:
        stats.policy_loss = float(np.mean(agg["policy"]))
        stats.value_loss = float(np.mean(agg["value"]))
        stats.entropy = float(np.mean(agg["entropy"]))
        stats.approx_kl = float(np.mean(agg["kl"]))
        stats.clip_fraction = float(np.mean(agg["clip"]))
        stats.grad_norm = float(np.mean(agg["norm"]))
    return stats
