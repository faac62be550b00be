"""Per-heat records and the grouped outcome/runtime statistics.

``records.jsonl`` holds one :class:`HeatRecord` per line::

    method, scenario, p_out, seed, heat    grouping / identity keys
    outcome          success | collision | offtrack | timeout | error
    pass_completed   bool
    unsafe_flag      bool (persistent low true clearance)
    steps, sim_time  control invocations and simulated seconds
    min_clearance    minimum of clearance_trace (m)
    clearance_trace  true front-cone clearance per control step (m)
    runtime_ms       controller wall time per control step (ms)
    events           [[t, kind], ...]
    max_cross_track  largest |lateral offset| from the raceline (m)
    progress         raceline metres covered by the ego
    error            message for heats that raised, else null
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

OUTCOMES = ("success", "collision", "offtrack", "timeout")
C_UNSAFE = 0.35
PERSISTENCE = 3
WARMUP_STEPS = 10
RUNTIME_FIELDS = ("runtime_ms",)


class EmptyGroup(ValueError):
    pass


@dataclass
class HeatRecord:
    method: str
    scenario: str
    p_out: float
    seed: int
    heat: int
    outcome: str
    pass_completed: bool = False
    unsafe_flag: bool = False
    steps: int = 0
    sim_time: float = 0.0
    min_clearance: float = math.inf
    clearance_trace: list = field(default_factory=list)
    runtime_ms: list = field(default_factory=list)
    events: list = field(default_factory=list)
    max_cross_track: float = 0.0
    progress: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["min_clearance"]):
            d["min_clearance"] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "HeatRecord":
        names = {f.name for f in fields(cls)}
        d = {k: v for k, v in d.items() if k in names}
        if d.get("min_clearance") is None:
            d["min_clearance"] = math.inf
        d["events"] = [tuple(e) for e in d.get("events", [])]
        return cls(**d)

    @classmethod
    def from_json(cls, line: str) -> "HeatRecord":
        return cls.from_dict(json.loads(line))

    def replay_key(self) -> dict:
        """Everything except wall-clock measurements."""
        d = self.to_dict()
        for k in RUNTIME_FIELDS:
            d.pop(k)
        d["events"] = [list(e) for e in d["events"]]
        return d


def read_records(path) -> list[HeatRecord]:
    with open(path) as fh:
        return [HeatRecord.from_json(line) for line in fh if line.strip()]


def unsafe_proximity(trace, c_unsafe: float = C_UNSAFE, m: int = PERSISTENCE) -> bool:
    """True iff some ``m`` consecutive clearances are all below ``c_unsafe``."""
    if m < 1:
        raise ValueError("persistence must be >= 1")
    run = 0
    for c in trace:
        run = run + 1 if c < c_unsafe else 0
        if run >= m:
            return True
    return False


@dataclass(frozen=True)
class MetricsSummary:
    method: str
    p_out: float
    n: int
    sr: float
    coll: float
    offtrk: float
    timeout: float
    error: float
    unsafe: float
    sr_safe: float
    runtime_mean_ms: float
    runtime_worst_ms: float
    runtime_samples: int

    CSV_FIELDS = (
        "method", "p_out", "n", "sr", "sr_safe", "coll", "offtrk", "timeout",
        "error", "unsafe", "runtime_mean_ms", "runtime_worst_ms", "runtime_samples",
    )

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


def summarize(records, warmup: int = WARMUP_STEPS) -> MetricsSummary:
    """Rates over one (method, p_out) group.

    Mean runtime uses every sample; the worst case skips each heat's first
    ``warmup`` samples.
    """
    records = list(records)
    if not records:
        raise EmptyGroup("no records to summarise")
    keys = {(r.method, float(r.p_out)) for r in records}
    if len(keys) != 1:
        raise ValueError(f"records span several groups: {sorted(keys)}")
    method, p_out = keys.pop()
    n = len(records)
    count = {k: 0 for k in (*OUTCOMES, "error")}
    for r in records:
        count[r.outcome] += 1
    unsafe = sum(r.unsafe_flag for r in records)
    safe_succ = sum(r.outcome == "success" and not r.unsafe_flag for r in records)
    all_rt = [x for r in records for x in r.runtime_ms]
    steady = [x for r in records for x in r.runtime_ms[warmup:]]
    mean = float(np.mean(all_rt)) if all_rt else math.nan
    worst = float(np.max(steady)) if steady else (float(np.max(all_rt)) if all_rt else math.nan)
    return MetricsSummary(
        method=method,
        p_out=p_out,
        n=n,
        sr=count["success"] / n,
        coll=count["collision"] / n,
        offtrk=count["offtrack"] / n,
        timeout=count["timeout"] / n,
        error=count["error"] / n,
        unsafe=unsafe / n,
        sr_safe=safe_succ / n,
        runtime_mean_ms=mean,
        runtime_worst_ms=worst,
        runtime_samples=len(all_rt),
    )


def group_records(records) -> dict[tuple[str, float], list[HeatRecord]]:
    groups: dict[tuple[str, float], list[HeatRecord]] = {}
    for r in records:
        groups.setdefault((r.method, float(r.p_out)), []).append(r)
    return dict(sorted(groups.items()))


def summarize_all(records) -> list[MetricsSummary]:
    return [summarize(g) for g in group_records(records).values()]
