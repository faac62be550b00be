"""Gate policy: tanh MLP actor with a Gaussian head over the unconstrained
gate logit, a separate tanh MLP critic, the running observation normaliser
and the checkpoint container shared with the trainer.

Checkpoint format (``.npz``)::

    format        "gatedrive-policy"
    version       1
    meta          JSON string (obs_dim, hidden sizes, free-form info)
    actor/W1 ...  actor/b3, critic/W1 ... critic/b3, log_std
    norm/mean, norm/var, norm/count, norm/clip
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .observation import OBS_DIM

CHECKPOINT_FORMAT = "gatedrive-policy"
CHECKPOINT_VERSION = 1
LOG_2PI = math.log(2.0 * math.pi)


class NonFiniteActivation(FloatingPointError):
    pass


class CheckpointError(ValueError):
    pass


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


class RunningNormalizer:
    """Streaming per-feature mean/variance (parallel-merge update)."""

    def __init__(self, dim: int, clip: float = 10.0, eps: float = 1e-8):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 0.0
        self.clip = clip
        self.eps = eps
        self.frozen = False

    def update(self, x) -> None:
        if self.frozen:
            return
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        if n == 0:
            return
        b_mean = x.mean(axis=0)
        b_var = x.var(axis=0)
        if self.count == 0:
            self.mean, self.var, self.count = b_mean, b_var, float(n)
            return
        tot = self.count + n
        delta = b_mean - self.mean
        m2 = self.var * self.count + b_var * n + delta**2 * self.count * n / tot
        self.mean = self.mean + delta * n / tot
        self.var = m2 / tot
        self.count = tot

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var + self.eps)

    def normalize(self, x, clip: bool = True) -> np.ndarray:
        y = (np.asarray(x, dtype=float) - self.mean) / self.std
        return np.clip(y, -self.clip, self.clip) if clip else y

    def denormalize(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.std + self.mean

    def copy(self) -> "RunningNormalizer":
        other = RunningNormalizer(len(self.mean), self.clip, self.eps)
        other.mean, other.var, other.count = self.mean.copy(), self.var.copy(), self.count
        other.frozen = self.frozen
        return other


def _orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.normal(size=(max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


def init_mlp(rng, sizes, out_gain) -> dict[str, np.ndarray]:
    params = {}
    n_layers = len(sizes) - 1
    for k in range(n_layers):
        gain = out_gain if k == n_layers - 1 else math.sqrt(2.0)
        params[f"W{k + 1}"] = _orthogonal(rng, sizes[k], sizes[k + 1], gain)
        params[f"b{k + 1}"] = np.zeros(sizes[k + 1])
    return params


def mlp_forward(p: dict[str, np.ndarray], x: np.ndarray):
    """Two tanh hidden layers, linear scalar output. Returns (out, cache)."""
    h1 = np.tanh(x @ p["W1"] + p["b1"])
    h2 = np.tanh(h1 @ p["W2"] + p["b2"])
    out = (h2 @ p["W3"] + p["b3"])[..., 0]
    return out, (x, h1, h2)


def mlp_backward(p: dict[str, np.ndarray], cache, dout: np.ndarray) -> dict[str, np.ndarray]:
    x, h1, h2 = cache
    d3 = dout[:, None]
    g = {"W3": h2.T @ d3, "b3": d3.sum(axis=0)}
    da2 = (d3 @ p["W3"].T) * (1.0 - h2**2)
    g["W2"] = h1.T @ da2
    g["b2"] = da2.sum(axis=0)
    da1 = (da2 @ p["W2"].T) * (1.0 - h1**2)
    g["W1"] = x.T @ da1
    g["b1"] = da1.sum(axis=0)
    return g


class GatePolicy:
    def __init__(self, obs_dim: int = OBS_DIM, hidden=(64, 64), seed: int = 0, log_std_init: float = 0.0):
        rng = np.random.default_rng(seed)
        sizes = (obs_dim, *hidden, 1)
        self.obs_dim = obs_dim
        self.hidden = tuple(hidden)
        self.actor = init_mlp(rng, sizes, out_gain=0.01)
        self.critic = init_mlp(rng, sizes, out_gain=1.0)
        self.log_std = np.array([log_std_init], dtype=float)
        self.normalizer = RunningNormalizer(obs_dim)

    # flat views used by the optimiser and the gradient checks
    def named_params(self) -> dict[str, np.ndarray]:
        out = {f"actor/{k}": v for k, v in self.actor.items()}
        out.update({f"critic/{k}": v for k, v in self.critic.items()})
        out["log_std"] = self.log_std
        return out

    def copy(self) -> "GatePolicy":
        other = GatePolicy.__new__(GatePolicy)
        other.obs_dim, other.hidden = self.obs_dim, self.hidden
        other.actor = {k: v.copy() for k, v in self.actor.items()}
        other.critic = {k: v.copy() for k, v in self.critic.items()}
        other.log_std = self.log_std.copy()
        other.normalizer = self.normalizer.copy()
        return other

    def mean_action(self, x: np.ndarray) -> np.ndarray:
        return mlp_forward(self.actor, np.atleast_2d(x))[0]

    def value(self, x: np.ndarray) -> np.ndarray:
        return mlp_forward(self.critic, np.atleast_2d(x))[0]

    def log_prob(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        mu = self.mean_action(x)
        ls = self.log_std[0]
        return -0.5 * ((z - mu) / math.exp(ls)) ** 2 - ls - 0.5 * LOG_2PI


def gate_forward(policy: GatePolicy, obs_normalized: np.ndarray, deterministic: bool = True, rng=None):
    """Gate value alpha = sigmoid(z) with the logit z and the critic value.

    Deterministic mode uses the Gaussian mean; otherwise z is sampled.
    """
    x = np.atleast_2d(np.asarray(obs_normalized, dtype=float))
    mu, (_, h1, h2) = mlp_forward(policy.actor, x)
    value = policy.value(x)
    if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(value))):
        raise NonFiniteActivation("policy produced a non-finite activation")
    z = float(mu[0])
    if not deterministic:
        if rng is None:
            raise ValueError("stochastic gate needs an rng")
        z += math.exp(policy.log_std[0]) * float(rng.normal())
    return float(sigmoid(z)), z, float(value[0])


def save_policy(policy: GatePolicy, path: str | Path, info: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"obs_dim": policy.obs_dim, "hidden": list(policy.hidden), "info": info or {}}
    arrays = {k: v for k, v in policy.named_params().items()}
    arrays.update(
        {
            "norm/mean": policy.normalizer.mean,
            "norm/var": policy.normalizer.var,
            "norm/count": np.array([policy.normalizer.count]),
            "norm/clip": np.array([policy.normalizer.clip]),
        }
    )
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format=np.array(CHECKPOINT_FORMAT),
            version=np.array(CHECKPOINT_VERSION),
            meta=np.array(json.dumps(meta)),
            **arrays,
        )
    return path


def load_policy(path: str | Path) -> GatePolicy:
    with np.load(path, allow_pickle=False) as data:
        if str(data.get("format", "")) != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path}: not a gate-policy checkpoint")
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        meta = json.loads(str(data["meta"]))
        policy = GatePolicy(meta["obs_dim"], tuple(meta["hidden"]))
        for name, arr in policy.named_params().items():
            if name not in data:
                raise CheckpointError(f"{path}: missing {name}")
            stored = data[name]
            if stored.shape != arr.shape:
                raise CheckpointError(f"{path}: {name} has shape {stored.shape}, expected {arr.shape}")
            arr[...] = stored
        policy.normalizer.mean = data["norm/mean"].copy()
        policy.normalizer.var = data["norm/var"].copy()
        policy.normalizer.count = float(data["norm/count"][0])
        policy.normalizer.clip = float(data["norm/clip"][0])
    policy.normalizer.frozen = True
    policy.info = meta.get("info", {})
    return policy
