"""The 10-feature arbiter observation and opponent-feature masking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..controllers import to_vehicle_frame
from ..lidar import LidarScan
from ..track import Raceline
from ..vehicle import VehicleState

FEATURES = ("v", "kappa0", "kappa1", "kappa2", "dkappa", "d_front", "d_opp", "sin_beta", "cos_beta", "dv")
OBS_DIM = len(FEATURES)
EGO = slice(0, 6)
OPP = slice(6, 10)
IDX = {name: i for i, name in enumerate(FEATURES)}


@dataclass(frozen=True)
class ObservationConfig:
    curvature_offsets: tuple[float, float, float] = (0.0, 2.0, 4.0)
    curvature_window: float = 4.0
    curvature_step: float = 0.5
    curvature_half_chord: float = 0.5
    front_fov: float = math.radians(40.0)
    front_percentile: float = 5.0


@dataclass(frozen=True)
class MaskConfig:
    p_mask: float = 0.0
    fill: tuple[float, float, float, float] = (20.0, 0.0, 1.0, 0.0)

    def __post_init__(self):
        if not 0.0 <= self.p_mask <= 1.0:
            raise ValueError("p_mask must lie in [0, 1]")

    @property
    def fill_array(self) -> np.ndarray:
        return np.asarray(self.fill, dtype=float)


def front_clearance(scan: LidarScan, fov: float, percentile: float) -> float:
    """Low-percentile range over the symmetric forward cone."""
    cone = scan.ranges[scan.geometry.cone_indices(0.5 * fov)]
    return float(np.percentile(cone, percentile))


def opponent_features(ego: VehicleState, opp: VehicleState) -> tuple[float, float, float, float]:
    fx, fy = to_vehicle_frame(ego, opp.x, opp.y)
    d = math.hypot(fx, fy)
    beta = math.atan2(fy, fx) if d > 0 else 0.0
    return d, math.sin(beta), math.cos(beta), ego.speed - opp.speed


def build_observation(
    ego: VehicleState,
    raceline: Raceline,
    scan: LidarScan,
    opp: VehicleState | None,
    cfg: ObservationConfig = ObservationConfig(),
    fill: MaskConfig = MaskConfig(),
) -> np.ndarray:
    s0, _, _ = raceline.project(ego.x, ego.y)
    h = cfg.curvature_half_chord
    ks = raceline.curvature_at(s0 + np.asarray(cfg.curvature_offsets), h=h)
    window = s0 + np.arange(0.0, cfg.curvature_window + 1e-9, cfg.curvature_step)
    kw = raceline.curvature_at(window, h=h)
    obs = np.empty(OBS_DIM)
    obs[0] = ego.speed
    obs[1:4] = ks
    obs[4] = float(kw.max() - kw.min())
    obs[5] = front_clearance(scan, cfg.front_fov, cfg.front_percentile)
    obs[OPP] = fill.fill_array if opp is None else opponent_features(ego, opp)
    return obs


def draw_mask(rng: np.random.Generator, p_mask: float) -> int:
    """Bernoulli keep-indicator with P(0) = p_mask."""
    if p_mask <= 0.0:
        return 1
    if p_mask >= 1.0:
        return 0
    return int(rng.random() >= p_mask)


def mask_opponent(obs: np.ndarray, m: int, cfg: MaskConfig) -> np.ndarray:
    if m:
        return obs
    out = obs.copy()
    out[OPP] = cfg.fill_array
    return out
