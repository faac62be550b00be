"""Heat batches, impairment sweeps and robustness-curve output.

A sweep directory holds::

    records.jsonl                 one HeatRecord per heat
    summary.csv                   one row per (method, p_out)
    runtime_hist.csv              per-step runtime histogram per group
    curves_<metric>.csv           method, p_out, value
    fig_robustness_<panel>.svg    line charts over p_out
"""

from __future__ import annotations

import csv
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .arbiter.policy import GatePolicy, load_policy
from .arbiter.runtime import ArbiterStack, PurePursuitOnly
from .config import ConfigError, ScenarioConfig
from .metrics import WARMUP_STEPS, HeatRecord, MetricsSummary, summarize_all
from .mpc import SamplingMpc
from .sim import run_heat, track_for

log = logging.getLogger(__name__)

METHODS = ("arbiter", "mpc", "pure_pursuit")


class InsufficientData(ValueError):
    pass


def resolve_policy(spec: str | Path | GatePolicy | None) -> GatePolicy:
    if isinstance(spec, GatePolicy):
        return spec
    if spec is None or str(spec) == "reference":
        spec = Path(str(resources.files("gatedrive") / "data" / "policies" / "reference.npz"))
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"no policy checkpoint at {path}")
    return load_policy(path)


def make_controller(method: str, scenario: ScenarioConfig, policy: GatePolicy | None = None, debug_path=None):
    raceline = track_for(scenario).raceline
    if method == "arbiter":
        if policy is None:
            raise ConfigError("the arbiter needs a gate policy")
        return ArbiterStack(raceline, policy, scenario.vehicle, scenario.arbiter)
    if method == "mpc":
        return SamplingMpc(raceline, scenario.vehicle, scenario.mpc, debug_path=debug_path)
    if method == "pure_pursuit":
        return PurePursuitOnly(raceline, scenario.vehicle, scenario.arbiter.pure_pursuit)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def safe_run_heat(scenario: ScenarioConfig, method: str, policy, seed: int, heat: int) -> HeatRecord:
    """Run one heat; a raising heat becomes an ``error`` record."""
    try:
        ctrl = make_controller(method, scenario, policy)
        return run_heat(scenario, ctrl, seed, heat, method=method)
    except ConfigError:
        raise
    except Exception as exc:  # recorded, never dropped
        log.error("heat %s seed=%s heat=%s p_out=%s failed: %s", method, seed, heat, scenario.impairments.p_out, exc)
        return HeatRecord(
            method=method,
            scenario=scenario.name,
            p_out=float(scenario.impairments.p_out),
            seed=int(seed),
            heat=int(heat),
            outcome="error",
            error="".join(traceback.format_exception_only(type(exc), exc)).strip(),
        )


def _job(args):
    return safe_run_heat(*args)


@dataclass(frozen=True)
class SweepGrid:
    methods: tuple[str, ...] = ("arbiter", "mpc")
    p_out: tuple[float, ...] = (0.0, 0.2, 0.4)
    seeds: tuple[int, ...] = (0, 1, 2)
    heats: int = 10

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        if self.heats < 1 or not self.seeds or not self.p_out or not self.methods:
            raise ConfigError("empty sweep grid")
        if any(not 0.0 <= p <= 1.0 for p in self.p_out):
            raise ConfigError("p_out values must lie in [0, 1]")

    @property
    def size(self) -> int:
        return len(self.methods) * len(self.p_out) * len(self.seeds) * self.heats

    def jobs(self):
        for m in self.methods:
            for p in self.p_out:
                for s in self.seeds:
                    for h in range(self.heats):
                        yield m, p, s, h

    @classmethod
    def from_section(cls, items: dict[str, str], desk: bool = False) -> "SweepGrid":
        def pick(key):
            if desk and f"desk_{key}" in items:
                return items[f"desk_{key}"]
            return items.get(key)

        def floats(v):
            return tuple(float(x) for x in v.split(",") if x.strip())

        def ints(v):
            return tuple(int(x) for x in v.split(",") if x.strip())

        kw = {}
        try:
            if pick("methods"):
                kw["methods"] = tuple(m.strip() for m in pick("methods").split(",") if m.strip())
            if pick("p_out"):
                kw["p_out"] = floats(pick("p_out"))
            if pick("seeds"):
                kw["seeds"] = ints(pick("seeds"))
            if pick("heats"):
                kw["heats"] = int(pick("heats"))
        except ValueError as exc:
            raise ConfigError(f"[sweep] {exc}") from exc
        return cls(**kw)


def write_records(records, path: Path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def write_summary(summaries: list[MetricsSummary], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=MetricsSummary.CSV_FIELDS)
        w.writeheader()
        for s in summaries:
            w.writerow(s.row())


def write_runtime_hist(records, path: Path, bins: int = 20) -> None:
    groups: dict = {}
    for r in records:
        groups.setdefault((r.method, float(r.p_out)), []).extend(r.runtime_ms)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "p_out", "bin_lo_ms", "bin_hi_ms", "count"])
        for (m, p), xs in sorted(groups.items()):
            if not xs:
                continue
            counts, edges = np.histogram(xs, bins=bins)
            for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                w.writerow([m, p, f"{lo:.6f}", f"{hi:.6f}", int(c)])


def run_batch(scenario: ScenarioConfig, jobs, policy=None, workers: int = 1) -> list[HeatRecord]:
    """Run (method, p_out, seed, heat) jobs; results come back in job order."""
    args = []
    for method, p_out, seed, heat in jobs:
        sc = scenario.with_impairments(p_out=p_out)
        args.append((sc, method, policy if method == "arbiter" else None, seed, heat))
    if workers <= 1:
        return [_job(a) for a in args]
    # one heat per worker at a time keeps runtime samples unshared
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, args))


def run_eval(
    scenario: ScenarioConfig,
    method: str,
    policy=None,
    seeds=None,
    heats: int | None = None,
    out_dir=None,
    workers: int = 1,
) -> tuple[list[HeatRecord], list[MetricsSummary]]:
    seeds = tuple(seeds) if seeds is not None else scenario.seeds
    heats = heats or scenario.heats
    pol = resolve_policy(policy) if method == "arbiter" else None
    jobs = [(method, scenario.impairments.p_out, s, h) for s in seeds for h in range(heats)]
    records = run_batch(scenario, jobs, pol, workers)
    summaries = summarize_all(records)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records(records, out / "records.jsonl")
        write_summary(summaries, out / "summary.csv")
        write_runtime_hist(records, out / "runtime_hist.csv")
    return records, summaries


def run_sweep(
    scenario: ScenarioConfig,
    grid: SweepGrid,
    policy=None,
    out_dir=None,
    workers: int = 1,
    curves: bool = True,
) -> tuple[list[HeatRecord], list[MetricsSummary]]:
    """Every method sees the same impairment parameters and seeds per grid
    point. A heat that raises is kept as an ``error`` record."""
    pol = resolve_policy(policy) if "arbiter" in grid.methods else None
    records = run_batch(scenario, list(grid.jobs()), pol, workers)
    if len(records) != grid.size:
        raise RuntimeError(f"expected {grid.size} records, got {len(records)}")
    summaries = summarize_all(records)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records(records, out / "records.jsonl")
        write_summary(summaries, out / "summary.csv")
        write_runtime_hist(records, out / "runtime_hist.csv")
        log.info("worst-case runtime skips the first %d steps of each heat", WARMUP_STEPS)
        if curves and len({s.p_out for s in summaries}) >= 2:
            emit_curves(summaries, out)
    return records, summaries


# ---------------------------------------------------------------------------
# robustness curves

CURVE_METRICS = ("sr_safe", "timeout", "unsafe", "runtime_mean_ms")
PANELS = {
    "safe_success": (("sr_safe",), "safe success rate", True),
    "failure_modes": (("timeout", "unsafe"), "failure rate", True),
    "runtime": (("runtime_mean_ms",), "mean step runtime (ms)", False),
}
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def curve_rows(summaries: list[MetricsSummary]) -> list[dict]:
    return [
        {"method": s.method, "p_out": s.p_out, **{m: getattr(s, m) for m in CURVE_METRICS}}
        for s in sorted(summaries, key=lambda s: (s.method, s.p_out))
    ]


def svg_line_chart(series: dict[str, list[tuple[float, float]]], title: str, ylabel: str, unit_range: bool, size=(480, 320)) -> str:
    """Self-contained SVG with one ``<polyline>`` per series (``data-series``
    attribute carries the series name)."""
    w, h = size
    ml, mr, mt, mb = 60, 130, 30, 45
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts if math.isfinite(y)]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x1 = x0 + 1.0
    if unit_range:
        y0, y1 = 0.0, 1.0
    else:
        y0, y1 = 0.0, (max(ys) * 1.15 if ys and max(ys) > 0 else 1.0)

    def px(x):
        return ml + (x - x0) / (x1 - x0) * (w - ml - mr)

    def py(y):
        return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<line x1="{ml}" y1="{h - mb}" x2="{w - mr}" y2="{h - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{h - mb}" stroke="black"/>',
    ]
    for x in sorted(set(xs)):
        out.append(f'<line x1="{px(x):.2f}" y1="{h - mb}" x2="{px(x):.2f}" y2="{h - mb + 4}" stroke="black"/>')
        out.append(f'<text x="{px(x):.2f}" y="{h - mb + 16}" text-anchor="middle">{x:g}</text>')
    for k in range(6):
        yv = y0 + (y1 - y0) * k / 5
        out.append(f'<line x1="{ml - 4}" y1="{py(yv):.2f}" x2="{ml}" y2="{py(yv):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 7}" y="{py(yv) + 4:.2f}" text-anchor="end">{yv:.2f}</text>')
    out.append(f'<text x="{(ml + w - mr) / 2:.1f}" y="{h - 8}" text-anchor="middle">outlier probability p_out</text>')
    out.append(f'<text x="14" y="{(mt + h - mb) / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {(mt + h - mb) / 2:.1f})">{ylabel}</text>')
    for n, (name, pts) in enumerate(series.items()):
        color = _COLORS[n % len(_COLORS)]
        pts = sorted(p for p in pts if math.isfinite(p[1]))
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        dash = ' stroke-dasharray="6,4"' if name.endswith(":unsafe") else ""
        out.append(f'<polyline data-series="{name}" fill="none" stroke="{color}" stroke-width="2"{dash} points="{coords}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        ly = mt + 8 + 16 * n
        out.append(f'<line x1="{w - mr + 10}" y1="{ly}" x2="{w - mr + 30}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{w - mr + 34}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_curves(summaries: list[MetricsSummary], out_dir) -> list[Path]:
    """Write per-metric CSVs and one SVG per panel; needs at least two
    outlier-probability levels."""
    summaries = list(summaries)
    if not summaries or len({s.p_out for s in summaries}) < 2:
        raise InsufficientData("robustness curves need at least two p_out levels")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = curve_rows(summaries)
    written = []
    path = out / "curves.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    written.append(path)
    for metric in CURVE_METRICS:
        path = out / f"curves_{metric}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "p_out", metric])
            for r in rows:
                w.writerow([r["method"], r["p_out"], r[metric]])
        written.append(path)
    methods = sorted({r["method"] for r in rows})
    for panel, (metrics, ylabel, unit) in PANELS.items():
        series = {}
        for m in methods:
            for metric in metrics:
                name = m if len(metrics) == 1 else f"{m}:{metric}"
                series[name] = [(r["p_out"], float(r[metric])) for r in rows if r["method"] == m]
        path = out / f"fig_robustness_{panel}.svg"
        path.write_text(svg_line_chart(series, panel.replace("_", " "), ylabel, unit))
        written.append(path)
    return written

