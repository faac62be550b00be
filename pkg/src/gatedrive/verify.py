"""Self-check suites run by ``gatedrive verify``.

Each suite compares a production routine against an independent brute-force
or statistical oracle and returns a :class:`SuiteResult`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .impairments import ImpairmentConfig, ImpairmentPipeline
from .lidar import LidarGeometry, LidarScan
from .metrics import unsafe_proximity
from .mpc import CandidateTrajectory, SamplingMpcConfig, screen_clearance
from .ppo.gae import compute_gae
from .vehicle import VehicleState


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<14} {self.detail} ({self.seconds:.2f} s)"


def gae_expansion(rewards, values, dones, last_value, gamma, lam):
    """Advantages from the explicit discounted sum of TD residuals."""
    n = len(rewards)
    v_next = np.append(values[1:], last_value)
    delta = [rewards[t] + gamma * v_next[t] * (1 - dones[t]) - values[t] for t in range(n)]
    adv = np.zeros(n)
    for t in range(n):
        acc, w = 0.0, 1.0
        for k in range(t, n):
            acc += w * delta[k]
            if dones[k]:
                break
            w *= gamma * lam
        adv[t] = acc
    return adv


def suite_gae(cases: int = 50, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(cases):
        n = int(rng.integers(1, 11))
        r, v = rng.normal(size=n), rng.normal(size=n)
        d = (rng.random(n) < 0.3).astype(float) if i % 2 else np.zeros(n)
        lv = float(rng.normal())
        g, lam = float(rng.uniform(0.8, 1.0)), float(rng.uniform(0.8, 1.0))
        adv, ret = compute_gae(r, v, d, lv, g, lam)
        ref = gae_expansion(r, v, d, lv, g, lam)
        worst = max(worst, float(np.max(np.abs(adv - ref))), float(np.max(np.abs(ret - (ref + v)))))
    return SuiteResult("gae", worst <= 1e-10, f"{cases} sequences, max abs error {worst:.2e}")


def suite_clearance(cases: int = 100, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    geom = LidarGeometry(beam_count=90)
    cfg = SamplingMpcConfig()
    worst = 0.0
    for _ in range(cases):
        ranges = rng.uniform(0.2, geom.range_max, geom.beam_count)
        ranges[rng.random(geom.beam_count) < 0.2] = geom.range_max
        scan = LidarScan(0.0, ranges, geom)
        ego = VehicleState(*rng.uniform(-5, 5, 2), float(rng.uniform(-math.pi, math.pi)), 2.0)
        local = rng.uniform(-1, 3, size=(cfg.horizon + 1, 2))
        c, s = math.cos(ego.heading), math.sin(ego.heading)
        world = np.column_stack([ego.x + c * local[:, 0] - s * local[:, 1], ego.y + s * local[:, 0] + c * local[:, 1]])
        traj = CandidateTrajectory(0.0, world, 2.0)
        _, c_min = screen_clearance(traj, scan, ego, cfg)
        best = math.inf
        for r, a in zip(ranges, geom.angles):
            if r >= geom.range_max - cfg.return_eps:
                continue
            px, py = r * math.cos(a), r * math.sin(a)
            for lx, ly in local:
                best = min(best, math.hypot(lx - px, ly - py))
        worst = max(worst, abs(c_min - best))
    return SuiteResult("clearance", worst <= 1e-9, f"{cases} scenes, max abs error {worst:.2e}")


def suite_unsafe(cases: int = 1000, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(cases):
        trace = rng.uniform(0.2, 0.6, int(rng.integers(0, 20)))
        m = int(rng.integers(1, 5))
        ref = any(all(c < 0.35 for c in trace[i : i + m]) for i in range(len(trace) - m + 1))
        bad += unsafe_proximity(trace, 0.35, m) != ref
    return SuiteResult("unsafe", bad == 0, f"{cases} traces, {bad} mismatches")


def impairment_statistics(scans: int = 10_000, p_out: float = 0.4, seed: int = 0, true_range: float = 5.0) -> dict:
    """Drive the base impairment chain with a constant scene at 30 Hz and
    measure what comes out of it."""
    cfg = ImpairmentConfig(p_out=p_out, seed=seed)
    geom = LidarGeometry()
    pipe = ImpairmentPipeline(cfg)
    clean = np.full(geom.beam_count, true_range)
    cone = np.zeros(geom.beam_count, bool)
    cone[geom.cone_indices(0.5 * cfg.cone_fov)] = True
    outside = ~cone
    period = 1.0 / 30.0
    min_age = math.inf
    prev_stamp = None
    holds = deliveries = unique = outlier_scans = 0
    leaks = 0
    resid = []
    for k in range(scans + 20):
        now = k * period
        out = pipe(LidarScan(now, clean, geom) if k < scans else None, now)
        if out is None:
            continue
        deliveries += 1
        min_age = min(min_age, now - out.stamp)
        if out.stamp == prev_stamp:
            holds += 1
            continue
        prev_stamp = out.stamp
        unique += 1
        short = out.ranges <= cfg.r_out + 1e-12
        outlier_scans += bool(short.any())
        leaks += int(np.count_nonzero(short & outside))
        resid.append(out.ranges[outside] - true_range)
    resid = np.concatenate(resid)
    return {
        "hold_fraction": holds / deliveries,
        "outlier_fraction": outlier_scans / unique,
        "noise_std": float(np.std(resid)),
        "min_age": min_age,
        "cone_leaks": leaks,
        "deliveries": deliveries,
    }


def suite_impairments(scans: int = 10_000, seed: int = 0) -> SuiteResult:
    st = impairment_statistics(scans, seed=seed)
    checks = [
        abs(st["hold_fraction"] - 0.3) <= 0.02,
        abs(st["outlier_fraction"] - 0.4) <= 0.015,
        abs(st["noise_std"] - 0.05) <= 0.0025,
        st["min_age"] >= 0.2 - 1e-9,
        st["cone_leaks"] == 0,
    ]
    detail = (
        f"hold {st['hold_fraction']:.4f}, outlier {st['outlier_fraction']:.4f}, "
        f"noise {st['noise_std']:.4f} m, min age {st['min_age'] * 1e3:.1f} ms, leaks {st['cone_leaks']}"
    )
    return SuiteResult("impairments", all(checks), detail)


SUITES = {
    "gae": suite_gae,
    "clearance": suite_clearance,
    "unsafe": suite_unsafe,
    "impairments": suite_impairments,
}


def run_suites(names=None) -> list[SuiteResult]:
    results = []
    for name in names or SUITES:
        t0 = time.perf_counter()
        try:
            res = SUITES[name]()
        except Exception as exc:
            res = SuiteResult(name, False, f"raised {type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results
