"""Scenario files: INI sections mapped onto the frozen config dataclasses.

A file may name a base file with ``include = other.ini`` in its
``[scenario]`` section; the base is read first and this file overrides it.
Keys ending in ``_deg`` are converted to radians for the matching field.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import math
import typing
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .arbiter.observation import MaskConfig, ObservationConfig
from .arbiter.runtime import ArbiterConfig, InteractionConfig, SafetyConfig
from .controllers import GapFollowConfig, PurePursuitConfig
from .impairments import ImpairmentConfig
from .lidar import LidarGeometry
from .mpc import CostWeights, SamplingMpcConfig
from .vehicle import VehicleParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OpponentConfig:
    enabled: bool = True
    gap: float = 5.0
    speed_factor: float = 0.6


@dataclass(frozen=True)
class SpawnConfig:
    start_s: float = 0.0
    randomize: bool = True
    lateral_jitter: float = 0.1
    heading_jitter: float = 0.05
    initial_speed: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "default"
    track: str = "chicane"
    heat_timeout: float = 60.0
    grace_window: float = 1.0
    pass_margin: float = 1.0
    control_rate: float = 30.0
    physics_substeps: int = 4
    seeds: tuple[int, ...] = (0, 1, 2)
    heats: int = 10
    policy: str = "reference"
    ego: SpawnConfig = SpawnConfig()
    opponent: OpponentConfig = OpponentConfig()
    vehicle: VehicleParams = VehicleParams()
    lidar: LidarGeometry = LidarGeometry()
    impairments: ImpairmentConfig = ImpairmentConfig.disabled()
    arbiter: ArbiterConfig = ArbiterConfig()
    mpc: SamplingMpcConfig = SamplingMpcConfig()
    source_hash: str = ""
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    def validate(self) -> "ScenarioConfig":
        if self.heat_timeout <= 0:
            raise ConfigError("heat_timeout must be positive")
        if self.control_rate <= 0 or self.physics_substeps < 1:
            raise ConfigError("bad control_rate/physics_substeps")
        if self.opponent.enabled and not 0.0 < self.opponent.speed_factor < 1.0:
            raise ConfigError("opponent speed_factor must lie in (0, 1)")
        if self.opponent.enabled and self.opponent.gap <= 2 * self.vehicle.collision_radius:
            raise ConfigError("opponent gap overlaps the ego at spawn")
        if self.heats < 1 or not self.seeds:
            raise ConfigError("need at least one seed and one heat")
        if self.impairments.cone_fov > self.lidar.fov:
            raise ConfigError("impairment cone exceeds the scanner field of view")
        return self

    @property
    def period(self) -> float:
        return 1.0 / self.control_rate

    @property
    def max_steps(self) -> int:
        return int(math.ceil(self.heat_timeout * self.control_rate - 1e-9))

    def with_impairments(self, **kw) -> "ScenarioConfig":
        return replace(self, impairments=replace(self.impairments, **kw))


# ---------------------------------------------------------------------------
# INI plumbing

_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _convert(raw: str, typ):
    origin = typing.get_origin(typ)
    if typ is bool:
        try:
            return _BOOL[raw.strip().lower()]
        except KeyError as exc:
            raise ConfigError(f"not a boolean: {raw!r}") from exc
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    if typ is str:
        return raw.strip()
    if origin is tuple:
        args = typing.get_args(typ)
        inner = args[0] if args else float
        parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
        return tuple(_convert(p, inner) for p in parts)
    raise ConfigError(f"unsupported field type {typ}")


def _apply_section(obj, items: dict[str, str], section: str):
    hints = typing.get_type_hints(type(obj))
    updates = {}
    for key, raw in items.items():
        name, deg = key, False
        if key.endswith("_deg") and key[:-4] in hints:
            name, deg = key[:-4], True
        if name not in hints or dataclasses.is_dataclass(getattr(obj, name, None)):
            raise ConfigError(f"[{section}] unknown key {key!r}")
        try:
            val = _convert(raw, hints[name])
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc
        if deg:
            val = math.radians(val)
        updates[name] = val
    try:
        return replace(obj, **updates) if updates else obj
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def _read_layers(path: Path, seen=None) -> list[Path]:
    seen = seen or set()
    path = path.resolve()
    if path in seen:
        raise ConfigError(f"include cycle at {path}")
    seen.add(path)
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    inc = cp.get("scenario", "include", fallback=None)
    layers = []
    if inc:
        base = Path(inc)
        if not base.is_absolute():
            base = path.parent / base
        layers = _read_layers(base, seen)
    return layers + [path]


def bundled_scenario(name: str) -> Path:
    return Path(str(resources.files("gatedrive") / "data" / "scenarios" / f"{name}.ini"))


def resolve_scenario_path(spec: str | Path) -> Path:
    p = Path(spec)
    if p.exists():
        return p
    b = bundled_scenario(str(spec))
    if b.exists():
        return b
    raise ConfigError(f"no scenario file {spec!r}")


def read_layers(spec: str | Path, overlays=()) -> configparser.ConfigParser:
    paths = _read_layers(resolve_scenario_path(spec))
    cp = configparser.ConfigParser()
    for p in paths:
        with open(p) as fh:
            cp.read_file(fh)
    for ov in overlays:
        if isinstance(ov, dict):
            cp.read_dict(ov)
        else:
            with open(ov) as fh:
                cp.read_file(fh)
    return cp


SECTION_PATHS = {
    "ego": ("ego",),
    "opponent": ("opponent",),
    "vehicle": ("vehicle",),
    "lidar": ("lidar",),
    "impairments": ("impairments",),
    "arbiter": ("arbiter",),
    "pure_pursuit": ("arbiter", "pure_pursuit"),
    "gap_follow": ("arbiter", "gap_follow"),
    "observation": ("arbiter", "observation"),
    "mask": ("arbiter", "mask"),
    "interaction": ("arbiter", "interaction"),
    "safety": ("arbiter", "safety"),
    "mpc": ("mpc",),
    "mpc_interaction": ("mpc", "interaction"),
    "mpc_weights_standard": ("mpc", "weights_standard"),
    "mpc_weights_interaction": ("mpc", "weights_interaction"),
}
# sections consumed by other loaders
PASSTHROUGH = {"reward", "ppo", "sweep", "train"}


def _set_path(root, path, items, section):
    if len(path) == 1:
        child = getattr(root, path[0])
        return replace(root, **{path[0]: _apply_section(child, items, section)})
    child = getattr(root, path[0])
    return replace(root, **{path[0]: _set_path(child, path[1:], items, section)})


def scenario_from_parser(cp: configparser.ConfigParser, source_hash: str = "") -> ScenarioConfig:
    sc = ScenarioConfig()
    top = {k: v for k, v in cp.items("scenario")} if cp.has_section("scenario") else {}
    top.pop("include", None)
    sc = _apply_section(sc, top, "scenario")
    extra = {}
    for section in cp.sections():
        if section == "scenario":
            continue
        items = dict(cp.items(section))
        if section in PASSTHROUGH:
            extra[section] = items
            continue
        if section not in SECTION_PATHS:
            raise ConfigError(f"unknown section [{section}]")
        sc = _set_path(sc, SECTION_PATHS[section], items, section)
    # the shared detector: mpc follows the arbiter unless overridden
    if not cp.has_section("mpc_interaction"):
        sc = replace(sc, mpc=replace(sc.mpc, interaction=sc.arbiter.interaction))
    sc = replace(sc, source_hash=source_hash, extra=extra)
    return sc.validate()


def file_hash(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def load_scenario(spec: str | Path = "eval", overlays=()) -> ScenarioConfig:
    """Load a scenario by path or bundled name, applying overlays in order
    (file paths or ``{section: {key: value}}`` dicts)."""
    path = resolve_scenario_path(spec)
    layers = _read_layers(path)
    files = layers + [Path(o) for o in overlays if not isinstance(o, dict)]
    cp = read_layers(path, overlays)
    return scenario_from_parser(cp, file_hash(files))


def section_floats(items: dict[str, str]) -> dict[str, float]:
    return {k: float(v) for k, v in items.items()}


__all__ = [
    "ArbiterConfig",
    "ConfigError",
    "CostWeights",
    "GapFollowConfig",
    "ImpairmentConfig",
    "InteractionConfig",
    "LidarGeometry",
    "MaskConfig",
    "ObservationConfig",
    "OpponentConfig",
    "PurePursuitConfig",
    "SafetyConfig",
    "SamplingMpcConfig",
    "ScenarioConfig",
    "SpawnConfig",
    "VehicleParams",
    "load_scenario",
]
