"""Planar LiDAR model: sphere tracing over the track's distance field plus
exact ray/disk hits for other vehicles."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .track import Track
from .vehicle import VehicleState


class EgoOutOfBounds(RuntimeError):
    pass


@dataclass(frozen=True)
class LidarGeometry:
    beam_count: int = 1080
    fov: float = math.radians(270.0)
    range_min: float = 0.05
    range_max: float = 10.0

    @property
    def angle_increment(self) -> float:
        return self.fov / self.beam_count

    @property
    def angle_min(self) -> float:
        return -0.5 * self.fov

    @property
    def angle_max(self) -> float:
        return self.angle_min + (self.beam_count - 1) * self.angle_increment

    @cached_property
    def angles(self) -> np.ndarray:
        return self.angle_min + np.arange(self.beam_count) * self.angle_increment

    def cone_indices(self, half_angle: float) -> np.ndarray:
        """Indices of beams with |angle| <= half_angle."""
        return np.flatnonzero(np.abs(self.angles) <= half_angle + 1e-12)


@dataclass(frozen=True, eq=False)
class LidarScan:
    stamp: float
    ranges: np.ndarray
    geometry: LidarGeometry

    def __post_init__(self):
        if len(self.ranges) != self.geometry.beam_count:
            raise ValueError("ranges length differs from beam_count")

    @property
    def angles(self) -> np.ndarray:
        return self.geometry.angles

    @property
    def range_min(self) -> float:
        return self.geometry.range_min

    @property
    def range_max(self) -> float:
        return self.geometry.range_max

    def with_ranges(self, ranges: np.ndarray) -> "LidarScan":
        return replace(self, ranges=ranges)

    def cone_min(self, half_angle: float) -> float:
        return float(np.min(self.ranges[self.geometry.cone_indices(half_angle)]))

    def same_as(self, other: "LidarScan") -> bool:
        return (
            self.stamp == other.stamp
            and self.geometry == other.geometry
            and np.array_equal(self.ranges, other.ranges)
        )


def _march_grid(track: Track, ox: float, oy: float, dirs: np.ndarray, r_max: float) -> np.ndarray:
    res = track.resolution
    field = track.distance_field
    occ = track.occupancy
    n = dirs.shape[0]
    t = np.zeros(n)
    hit = np.full(n, r_max)
    active = np.arange(n)
    min_step = 0.5 * res
    for _ in range(4000):
        if active.size <= _DENSE_TAIL:
            break
        ta = t[active]
        px = ox + ta * dirs[active, 0]
        py = oy + ta * dirs[active, 1]
        i = np.floor((px - track.origin[0]) / res).astype(int)
        j = np.floor((py - track.origin[1]) / res).astype(int)
        inside = (i >= 0) & (i < track.width) & (j >= 0) & (j < track.height)
        ic, jc = np.where(inside, i, 0), np.where(inside, j, 0)
        blocked = ~inside | occ[jc, ic]
        done = blocked | (ta >= r_max)
        hit[active[blocked]] = np.minimum(ta[blocked], r_max)
        keep = ~done
        step = np.maximum(field[jc, ic] - 1.5 * res, min_step)
        t[active[keep]] = ta[keep] + step[keep]
        active = active[keep]
    if active.size:
        hit[active] = _dense_tail(track, ox, oy, dirs[active], t[active], r_max, min_step)
    return hit


# rays still marching after the bulk has landed are finished by dense sampling
_DENSE_TAIL = 48


def _dense_tail(track: Track, ox, oy, dirs, t0, r_max, step):
    res = track.resolution
    n_s = int(np.ceil((r_max - t0.min()) / step)) + 1
    ts = t0[:, None] + step * np.arange(n_s)[None, :]
    px = ox + ts * dirs[:, :1]
    py = oy + ts * dirs[:, 1:]
    i = np.floor((px - track.origin[0]) / res).astype(int)
    j = np.floor((py - track.origin[1]) / res).astype(int)
    inside = (i >= 0) & (i < track.width) & (j >= 0) & (j < track.height)
    blocked = ~inside | track.occupancy[np.where(inside, j, 0), np.where(inside, i, 0)]
    blocked &= ts <= r_max
    first = np.argmax(blocked, axis=1)
    found = blocked[np.arange(len(t0)), first]
    return np.where(found, np.minimum(ts[np.arange(len(t0)), first], r_max), r_max)


def _ray_disks(ox: float, oy: float, dirs: np.ndarray, others, radius: float) -> np.ndarray:
    best = np.full(dirs.shape[0], np.inf)
    for o in others:
        cx, cy = o.x - ox, o.y - oy
        b = dirs[:, 0] * cx + dirs[:, 1] * cy
        c = cx * cx + cy * cy - radius * radius
        disc = b * b - c
        ok = disc >= 0
        root = np.sqrt(np.where(ok, disc, 0.0))
        t0 = b - root
        # origin inside the disk: report the exit point
        t = np.where(c < 0, b + root, t0)
        t = np.where(ok & (t >= 0), t, np.inf)
        best = np.minimum(best, t)
    return best


def simulate_lidar(
    ego: VehicleState,
    track: Track,
    others,
    geometry: LidarGeometry,
    stamp: float,
    other_radius: float = 0.25,
) -> LidarScan:
    """Range to the nearest wall cell or other-vehicle disk along each beam."""
    if track.is_occupied(ego.x, ego.y):
        raise EgoOutOfBounds(f"ego at ({ego.x:.3f}, {ego.y:.3f}) is inside an occupied cell")
    world = ego.heading + geometry.angles
    dirs = np.column_stack([np.cos(world), np.sin(world)])
    ranges = _march_grid(track, ego.x, ego.y, dirs, geometry.range_max)
    if others:
        ranges = np.minimum(ranges, _ray_disks(ego.x, ego.y, dirs, others, other_radius))
    ranges = np.clip(ranges, geometry.range_min, geometry.range_max)
    return LidarScan(stamp, ranges, geometry)
