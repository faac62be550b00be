"""Command-line entry point: ``gatedrive {train,eval,sweep,plot,verify}``.

Exit status: 0 success, 1 runtime fault, 2 usage error, 3 configuration
error. Every run directory receives a ``manifest.json`` written before the
workflow starts and finalised when it ends.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, _read_layers, load_scenario, resolve_scenario_path
from .harness import METHODS, InsufficientData, SweepGrid, emit_curves, run_eval, run_sweep
from .metrics import MetricsSummary, read_records, summarize_all

log = logging.getLogger("gatedrive")

EXIT_OK, EXIT_FAULT, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def config_hashes(paths) -> dict[str, str]:
    return {str(p): hashlib.sha256(Path(p).read_bytes()).hexdigest() for p in paths}


@dataclass
class RunManifest:
    command: list[str]
    config_hashes: dict[str, str]
    seeds: list[int]
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    status: str = "running"
    host: dict = field(
        default_factory=lambda: {
            "node": platform.node(),
            "platform": platform.platform(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "cpus": os.cpu_count(),
        }
    )
    extra: dict = field(default_factory=dict)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n")
        return path

    def finalize(self, out_dir, status: str) -> Path:
        self.status = status
        self.finished = _now()
        return self.write(out_dir)


def _layers(spec) -> list[Path]:
    return _read_layers(resolve_scenario_path(spec))


def _seeds(args, default) -> tuple[int, ...]:
    if getattr(args, "seed", None) is not None:
        return (args.seed,)
    if getattr(args, "seeds", None):
        return tuple(args.seeds)
    return tuple(default)


def ppo_from_config(items: dict[str, str], desk: bool):
    from .ppo import PPOHyperparams

    fields = {f.name: f.type for f in dataclasses.fields(PPOHyperparams)}
    kw = {}
    for key, raw in items.items():
        name = key[5:] if key.startswith("desk_") else key
        if key.startswith("desk_") and not desk:
            continue
        if not key.startswith("desk_") and desk and f"desk_{key}" in items:
            continue
        if name not in fields:
            raise ConfigError(f"[ppo] unknown key {key!r}")
        typ = fields[name]
        try:
            if "bool" in str(typ):
                kw[name] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif "int" in str(typ):
                kw[name] = int(float(raw))
            else:
                kw[name] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"[ppo] {key}: {exc}") from exc
    try:
        return PPOHyperparams(**kw)
    except ValueError as exc:
        raise ConfigError(f"[ppo] {exc}") from exc


def reward_from_config(items: dict[str, str]):
    from .ppo import RewardConfig

    names = {f.name for f in dataclasses.fields(RewardConfig)}
    bad = set(items) - names
    if bad:
        raise ConfigError(f"[reward] unknown keys {sorted(bad)}")
    try:
        return RewardConfig(**{k: float(v) for k, v in items.items()})
    except ValueError as exc:
        raise ConfigError(f"[reward] {exc}") from exc


# ---------------------------------------------------------------------------
# workflows


def cmd_train(args) -> int:
    from .ppo import train

    spec = args.scenario or ("train_short" if args.desk else "train")
    sc = load_scenario(spec)
    hp = ppo_from_config(sc.extra.get("ppo", {}), args.desk)
    if args.steps is not None:
        hp = dataclasses.replace(hp, total_steps=args.steps)
    reward = reward_from_config(sc.extra.get("reward", {}))
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out)
    man = RunManifest(sys.argv[:1] + args.argv, config_hashes(_layers(spec)), [seed], extra={"total_steps": hp.total_steps})
    man.write(out)
    try:
        res = train(sc, hp, reward, seed, out, progress=lambda row: log.info("step %d eval reward %.3f success %.2f", row["step"], row["eval_reward"], row["eval_success"]))
    except BaseException:
        man.finalize(out, "error")
        raise
    man.extra.update(best=str(res.best_path), best_reward=res.best_reward)
    man.finalize(out, "ok")
    print(f"best checkpoint {res.best_path} (eval reward {res.best_reward:.3f})")
    return EXIT_OK


def _print_summary(summaries: list[MetricsSummary]) -> None:
    print(f"{'method':<14}{'p_out':>6}{'n':>5}{'SR':>7}{'SR_safe':>9}{'Coll':>7}{'OffTrk':>8}{'T/O':>7}{'Unsafe':>8}{'mean ms':>9}{'worst ms':>10}")
    for s in summaries:
        print(
            f"{s.method:<14}{s.p_out:>6.2f}{s.n:>5}{s.sr:>7.2f}{s.sr_safe:>9.2f}{s.coll:>7.2f}{s.offtrk:>8.2f}"
            f"{s.timeout:>7.2f}{s.unsafe:>8.2f}{s.runtime_mean_ms:>9.3f}{s.runtime_worst_ms:>10.3f}"
        )


def cmd_eval(args) -> int:
    spec = args.scenario or "eval"
    sc = load_scenario(spec)
    seeds = _seeds(args, (0, 1) if args.desk else sc.seeds)
    heats = args.heats or (5 if args.desk else sc.heats)
    out = Path(args.out)
    man = RunManifest(sys.argv[:1] + args.argv, config_hashes(_layers(spec)), list(seeds), extra={"method": args.method, "heats": heats, "policy": str(args.policy)})
    man.write(out)
    try:
        _, summaries = run_eval(sc, args.method, args.policy, seeds, heats, out, args.workers)
    except BaseException:
        man.finalize(out, "error")
        raise
    man.finalize(out, "ok")
    _print_summary(summaries)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = args.grid or "sweep"
    sc = load_scenario(spec)
    grid = SweepGrid.from_section(sc.extra.get("sweep", {}), desk=args.desk)
    if args.seed is not None:
        grid = dataclasses.replace(grid, seeds=(args.seed,))
    if args.methods:
        grid = dataclasses.replace(grid, methods=tuple(args.methods))
    out = Path(args.out)
    man = RunManifest(
        sys.argv[:1] + args.argv,
        config_hashes(_layers(spec)),
        list(grid.seeds),
        extra={"grid": dataclasses.asdict(grid), "policy": str(args.policy)},
    )
    man.write(out)
    try:
        _, summaries = run_sweep(sc, grid, args.policy, out, args.workers)
    except BaseException:
        man.finalize(out, "error")
        raise
    man.finalize(out, "ok")
    _print_summary(summaries)
    return EXIT_OK


def cmd_plot(args) -> int:
    src = Path(args.inp)
    path = src / "records.jsonl" if src.is_dir() else src
    if not path.exists():
        raise ConfigError(f"no records at {path}")
    records = read_records(path)
    summaries = summarize_all(records)
    out = Path(args.out)
    man = RunManifest(sys.argv[:1] + args.argv, config_hashes([path]), sorted({r.seed for r in records}), extra={"input": str(path)})
    man.write(out)
    try:
        written = emit_curves(summaries, out)
    except BaseException:
        man.finalize(out, "error")
        raise
    man.finalize(out, "ok")
    for p in written:
        print(p)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suites

    unknown = [s for s in args.suites if s not in SUITES]
    if unknown:
        print(f"unknown suites {unknown}; choose from {sorted(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    results = run_suites(args.suites or None)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all suites passed" if ok else "some suites FAILED")
    return EXIT_OK if ok else EXIT_FAULT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gatedrive", description="Train, evaluate and stress-test the gated racing controller.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--desk", action="store_true", help="reduced scales for a single desktop run")
    p.add_argument("--seed", type=int, default=None, help="override configured seeds")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="{train,eval,sweep,plot,verify}")
    sub.required = True

    t = sub.add_parser("train", help="train a gate policy with PPO")
    t.add_argument("--scenario", help="scenario file or bundled name (default train, train_short with --desk)")
    t.add_argument("--steps", type=int, help="total environment steps")
    t.add_argument("--out", default="runs/train")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="run evaluation heats for one method")
    e.add_argument("--scenario", help="scenario file or bundled name (default eval)")
    e.add_argument("--method", choices=METHODS, default="arbiter")
    e.add_argument("--policy", default="reference", help="checkpoint path or 'reference'")
    e.add_argument("--seeds", type=int, nargs="+")
    e.add_argument("--heats", type=int)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out", default="runs/eval")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="outlier-rate sweep over methods")
    s.add_argument("--grid", help="sweep scenario file or bundled name (default sweep)")
    s.add_argument("--desk", action="store_true", default=argparse.SUPPRESS, help="same as the global flag")
    s.add_argument("--methods", nargs="+", choices=METHODS)
    s.add_argument("--policy", default="reference")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default="runs/sweep")
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="robustness curves from a records file")
    pl.add_argument("--in", dest="inp", required=True, help="sweep directory or records.jsonl")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)

    v = sub.add_parser("verify", help="run the built-in oracle suites")
    v.add_argument("suites", nargs="*", help="subset of gae, clearance, unsafe, impairments")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientData as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except KeyboardInterrupt:
        return EXIT_FAULT
    except Exception as exc:
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAULT
