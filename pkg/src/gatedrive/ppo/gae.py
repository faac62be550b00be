from __future__ import annotations

import numpy as np


class LengthMismatch(ValueError):
    pass


def compute_gae(rewards, values, dones, last_value: float, gamma: float, lam: float):
    """Generalised advantage estimates and value targets.

    ``dones[t]`` marks that the episode ended after step ``t``; ``last_value``
    bootstraps the state following the final step.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=float)
    if not (r.shape == v.shape == d.shape) or r.ndim != 1:
        raise LengthMismatch(f"rewards {r.shape}, values {v.shape}, dones {d.shape}")
    n = len(r)
    adv = np.zeros(n)
    next_v, acc = float(last_value), 0.0
    for t in range(n - 1, -1, -1):
        live = 1.0 - d[t]
        delta = r[t] + gamma * live * next_v - v[t]
        acc = delta + gamma * lam * live * acc
        adv[t] = acc
        next_v = v[t]
    return adv, adv + v
