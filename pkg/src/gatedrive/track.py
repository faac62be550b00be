"""Racelines, occupancy-grid tracks, their text file format, and the
synthetic track generators.

Track file (``<name>.grid``)::

    # gatedrive track v1
    resolution 0.05
    origin -3.0 -3.0
    width 640
    height 420
    grid
    000111...          <- one line per row, row j is cell y index j
    ...

Cell (i, j) covers ``[origin_x + i*res, origin_x + (i+1)*res)`` in x and the
matching interval in y; ``1`` marks an occupied cell.

Raceline file (``<name>_raceline.csv``)::

    # closed=true
    x,y,reference_speed
    0.0,0.0,3.0
    ...
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

TRACK_HEADER = "# gatedrive track v1"


class TrackFormatError(ValueError):
    pass


class Raceline:
    """Piecewise-linear reference path with per-waypoint target speeds."""

    def __init__(self, xs, ys, speeds, closed: bool = True):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.speeds = np.asarray(speeds, dtype=float)
        self.closed = bool(closed)
        n = len(self.xs)
        if n < 3:
            raise ValueError("a raceline needs at least 3 waypoints")
        if not (len(self.ys) == n and len(self.speeds) == n):
            raise ValueError("waypoint arrays differ in length")
        nxt_x = np.roll(self.xs, -1) if self.closed else self.xs[1:]
        nxt_y = np.roll(self.ys, -1) if self.closed else self.ys[1:]
        m = n if self.closed else n - 1
        seg = np.hypot(nxt_x - self.xs[:m], nxt_y - self.ys[:m])
        if np.any(seg <= 0):
            raise ValueError("consecutive waypoints must be distinct")
        self._seg_len = seg
        self._ax, self._ay = self.xs[:m], self.ys[:m]
        self._dx, self._dy = nxt_x - self._ax, nxt_y - self._ay
        self.s = np.concatenate([[0.0], np.cumsum(seg)])[:n]
        self.length = float(np.sum(seg))
        # knot arrays for interpolation, closing knot appended on loops
        if self.closed:
            self._ks = np.append(self.s, self.length)
            self._kx = np.append(self.xs, self.xs[0])
            self._ky = np.append(self.ys, self.ys[0])
            self._kv = np.append(self.speeds, self.speeds[0])
        else:
            self._ks, self._kx, self._ky, self._kv = self.s, self.xs, self.ys, self.speeds

    def __len__(self):
        return len(self.xs)

    def wrap(self, s):
        if self.closed:
            return np.mod(s, self.length)
        return np.clip(s, 0.0, self.length)

    def point_at(self, s):
        s = self.wrap(s)
        return np.interp(s, self._ks, self._kx), np.interp(s, self._ks, self._ky)

    def speed_at(self, s):
        return np.interp(self.wrap(s), self._ks, self._kv)

    def heading_at(self, s, h: float = 0.05):
        x0, y0 = self.point_at(np.asarray(s) - h)
        x1, y1 = self.point_at(np.asarray(s) + h)
        return np.arctan2(y1 - y0, x1 - x0)

    def curvature_at(self, s, h: float = 0.5):
        """Signed curvature of the circle through the points at s-h, s, s+h."""
        s = np.asarray(s, dtype=float)
        ax, ay = self.point_at(s - h)
        bx, by = self.point_at(s)
        cx, cy = self.point_at(s + h)
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        ab = np.hypot(bx - ax, by - ay)
        bc = np.hypot(cx - bx, cy - by)
        ca = np.hypot(ax - cx, ay - cy)
        denom = ab * bc * ca
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(denom > 1e-12, 2.0 * cross / denom, 0.0)
        return k

    def project(self, x: float, y: float):
        """Nearest point on the path.

        Returns ``(s, lateral, distance)`` where ``lateral`` is positive when
        the query lies left of the direction of travel.
        """
        px, py = x - self._ax, y - self._ay
        t = np.clip((px * self._dx + py * self._dy) / (self._seg_len**2), 0.0, 1.0)
        ex, ey = px - t * self._dx, py - t * self._dy
        d2 = ex * ex + ey * ey
        k = int(np.argmin(d2))
        s = self.s[k] + t[k] * self._seg_len[k]
        if self.closed:
            s = s % self.length
        cross = self._dx[k] * py[k] - self._dy[k] * px[k]
        dist = math.sqrt(d2[k])
        return float(s), math.copysign(dist, cross) if dist > 0 else 0.0, dist

    def delta_s(self, s_from: float, s_to: float) -> float:
        """Signed arclength change, taking the short way round on loops."""
        d = s_to - s_from
        if self.closed:
            d = (d + 0.5 * self.length) % self.length - 0.5 * self.length
        return d


@dataclass
class Track:
    occupancy: np.ndarray  # bool, shape (height, width), [j, i]
    resolution: float
    origin: tuple[float, float]
    raceline: Raceline
    name: str = "track"
    _edt: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def height(self) -> int:
        return self.occupancy.shape[0]

    @property
    def width(self) -> int:
        return self.occupancy.shape[1]

    @cached_property
    def distance_field(self) -> np.ndarray:
        """Metres from each cell centre to the nearest occupied cell centre."""
        return ndimage.distance_transform_edt(~self.occupancy) * self.resolution

    def cell_of(self, x, y):
        i = np.floor((np.asarray(x) - self.origin[0]) / self.resolution).astype(int)
        j = np.floor((np.asarray(y) - self.origin[1]) / self.resolution).astype(int)
        return i, j

    def in_bounds(self, i, j):
        return (i >= 0) & (i < self.width) & (j >= 0) & (j < self.height)

    def is_occupied(self, x: float, y: float) -> bool:
        i, j = self.cell_of(x, y)
        if not self.in_bounds(i, j):
            return True
        return bool(self.occupancy[j, i])

    def wall_clearance(self, x: float, y: float) -> float:
        """Approximate distance from a point to the nearest occupied cell edge."""
        i, j = self.cell_of(x, y)
        if not self.in_bounds(i, j) or self.occupancy[j, i]:
            return 0.0
        return max(float(self.distance_field[j, i]) - 0.5 * self.resolution, 0.0)


# ---------------------------------------------------------------------------
# file format


def save_track(track: Track, directory: str | Path, name: str | None = None) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = name or track.name
    grid_path = directory / f"{name}.grid"
    line_path = directory / f"{name}_raceline.csv"
    rows = ["".join("1" if c else "0" for c in row) for row in track.occupancy]
    header = [
        TRACK_HEADER,
        f"resolution {track.resolution!r}",
        f"origin {track.origin[0]!r} {track.origin[1]!r}",
        f"width {track.width}",
        f"height {track.height}",
        "grid",
    ]
    grid_path.write_text("\n".join(header + rows) + "\n")
    save_raceline(track.raceline, line_path)
    return grid_path, line_path


def save_raceline(raceline: Raceline, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# closed={'true' if raceline.closed else 'false'}\n")
        w = csv.writer(fh)
        w.writerow(["x", "y", "reference_speed"])
        for x, y, v in zip(raceline.xs, raceline.ys, raceline.speeds):
            w.writerow([f"{x:.6f}", f"{y:.6f}", f"{v:.4f}"])


def load_raceline(path: str | Path) -> Raceline:
    closed = True
    xs, ys, vs = [], [], []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip()]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].strip().partition("=")
            if key.strip() == "closed":
                closed = val.strip().lower() in ("1", "true", "yes")
        else:
            body.append(ln)
    reader = csv.DictReader(body)
    for row in reader:
        xs.append(float(row["x"]))
        ys.append(float(row["y"]))
        vs.append(float(row["reference_speed"]))
    return Raceline(xs, ys, vs, closed=closed)


def load_track(spec: str | Path) -> Track:
    """Load a track by file stem path or by the name of a bundled track."""
    path = Path(spec)
    if path.suffix == ".grid":
        grid_path = path
    elif path.with_suffix(".grid").exists():
        grid_path = path.with_suffix(".grid")
    else:
        bundled = resources.files("gatedrive") / "data" / "tracks" / f"{spec}.grid"
        grid_path = Path(str(bundled))
    if not grid_path.exists():
        raise FileNotFoundError(f"no track named {spec!r}")
    line_path = grid_path.with_name(grid_path.stem + "_raceline.csv")
    lines = grid_path.read_text().splitlines()
    if not lines or lines[0].strip() != TRACK_HEADER:
        raise TrackFormatError(f"{grid_path}: missing header")
    meta = {}
    k = 1
    while k < len(lines) and lines[k].strip() != "grid":
        parts = lines[k].split()
        if parts:
            meta[parts[0]] = parts[1:]
        k += 1
    try:
        res = float(meta["resolution"][0])
        origin = (float(meta["origin"][0]), float(meta["origin"][1]))
        width, height = int(meta["width"][0]), int(meta["height"][0])
    except (KeyError, IndexError, ValueError) as exc:
        raise TrackFormatError(f"{grid_path}: bad header") from exc
    rows = lines[k + 1 : k + 1 + height]
    if len(rows) != height or any(len(r) != width for r in rows):
        raise TrackFormatError(f"{grid_path}: grid does not match {width}x{height}")
    occ = np.array([[c == "1" for c in r] for r in rows], dtype=bool)
    return Track(occ, res, origin, load_raceline(line_path), name=grid_path.stem)


# ---------------------------------------------------------------------------
# synthetic tracks


def _resample_closed(px: np.ndarray, py: np.ndarray, spacing: float):
    seg = np.hypot(np.diff(px, append=px[0]), np.diff(py, append=py[0]))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    n = int(round(total / spacing))
    t = np.linspace(0.0, total, n, endpoint=False)
    return np.interp(t, s, np.append(px, px[0])), np.interp(t, s, np.append(py, py[0]))


def speed_profile(raceline_xy: tuple[np.ndarray, np.ndarray], v_top: float, v_low: float, lat_acc: float):
    xs, ys = raceline_xy
    tmp = Raceline(xs, ys, np.ones_like(xs), closed=True)
    k = np.abs(tmp.curvature_at(tmp.s, h=0.5))
    v = np.sqrt(lat_acc / np.maximum(k, 1e-6))
    v = np.clip(v, v_low, v_top)
    # smooth so the speed reference varies gently around corners
    v = ndimage.uniform_filter1d(v, size=max(3, int(2.0 / np.mean(tmp._seg_len))), mode="wrap")
    return v


def build_track(
    px,
    py,
    *,
    name: str,
    half_width: float = 1.5,
    resolution: float = 0.05,
    margin: float = 1.0,
    spacing: float = 0.1,
    v_top: float = 3.2,
    v_low: float = 2.2,
    lat_acc: float = 1.8,
) -> Track:
    """Corridor of ``half_width`` around a closed centre curve; the centre
    curve becomes the raceline."""
    xs, ys = _resample_closed(np.asarray(px, float), np.asarray(py, float), spacing)
    speeds = speed_profile((xs, ys), v_top, v_low, lat_acc)
    x0 = math.floor((xs.min() - half_width - margin) / resolution) * resolution
    y0 = math.floor((ys.min() - half_width - margin) / resolution) * resolution
    width = int(math.ceil((xs.max() + half_width + margin - x0) / resolution))
    height = int(math.ceil((ys.max() + half_width + margin - y0) / resolution))
    dense_x, dense_y = _resample_closed(xs, ys, resolution / 4)
    tree = cKDTree(np.column_stack([dense_x, dense_y]))
    ci = x0 + (np.arange(width) + 0.5) * resolution
    cj = y0 + (np.arange(height) + 0.5) * resolution
    gx, gy = np.meshgrid(ci, cj)
    dist, _ = tree.query(np.column_stack([gx.ravel(), gy.ravel()]))
    occ = (dist > half_width).reshape(height, width)
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True
    return Track(occ, resolution, (round(x0, 6), round(y0, 6)), Raceline(xs, ys, speeds, closed=True), name=name)


def oval_track(**kw) -> Track:
    """Elliptic loop used for training."""
    t = np.linspace(0.0, 2 * np.pi, 4000, endpoint=False)
    return build_track(13.0 * np.cos(t), 8.0 * np.sin(t), name="oval", **kw)


def chicane_track(**kw) -> Track:
    """Loop with alternating bends used for evaluation."""
    t = np.linspace(0.0, 2 * np.pi, 4000, endpoint=False)
    r = 11.0 + 1.2 * np.sin(3 * t)
    return build_track(1.25 * r * np.cos(t), r * np.sin(t), name="chicane", **kw)


def straight_track(length: float = 30.0, name: str = "straight", **kw) -> Track:
    """A long thin loop whose bottom run is a straight of ``length`` metres."""
    t = np.linspace(0.0, 2 * np.pi, 4000, endpoint=False)
    # stadium: two straights joined by semicircles of radius 6
    rad = 6.0
    per = 2 * length + 2 * np.pi * rad
    u = t / (2 * np.pi) * per
    px = np.empty_like(u)
    py = np.empty_like(u)
    a = u < length
    px[a], py[a] = u[a], -rad
    b = (u >= length) & (u < length + np.pi * rad)
    ang = (u[b] - length) / rad - np.pi / 2
    px[b], py[b] = length + rad * np.cos(ang), rad * np.sin(ang)
    c = (u >= length + np.pi * rad) & (u < 2 * length + np.pi * rad)
    px[c], py[c] = length - (u[c] - length - np.pi * rad), rad
    d = u >= 2 * length + np.pi * rad
    ang = (u[d] - 2 * length - np.pi * rad) / rad + np.pi / 2
    px[d], py[d] = rad * np.cos(ang), rad * np.sin(ang)
    return build_track(px, py, name=name, **kw)


def empty_room(size: float = 10.0, resolution: float = 0.05, wall: float = 0.5) -> Track:
    """Square room with solid walls; its raceline is a small square loop."""
    n = int(round((size + 2 * wall) / resolution))
    occ = np.zeros((n, n), dtype=bool)
    w = int(round(wall / resolution))
    occ[:w, :] = occ[-w:, :] = True
    occ[:, :w] = occ[:, -w:] = True
    c = size / 2
    line = Raceline([c - 1, c + 1, c + 1, c - 1], [c - 1, c - 1, c + 1, c + 1], [1, 1, 1, 1])
    return Track(occ, resolution, (-wall, -wall), line, name="room")


BUNDLED = {"oval": oval_track, "chicane": chicane_track, "straight": straight_track}
