import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gatedrive.metrics import EmptyGroup, HeatRecord, read_records, summarize, summarize_all, unsafe_proximity


def brute_unsafe(trace, c, m):
    return any(all(x < c for x in trace[i : i + m]) for i in range(len(trace) - m + 1))


@given(st.lists(st.floats(0.0, 1.0), max_size=30), st.integers(1, 6))
def test_unsafe_matches_window_scan(trace, m):
    assert unsafe_proximity(trace, 0.35, m) == brute_unsafe(trace, 0.35, m)


def test_unsafe_edges():
    assert not unsafe_proximity([0.35, 0.35, 0.35])  # strict inequality
    assert unsafe_proximity([0.3, 0.3, 0.3])
    assert not unsafe_proximity([0.3, 0.3, 0.5, 0.3, 0.3])
    assert not unsafe_proximity([])
    with pytest.raises(ValueError):
        unsafe_proximity([0.1], m=0)


def rec(outcome, unsafe=False, runtime=(1.0,), method="m", p_out=0.0, heat=0):
    return HeatRecord(method, "s", p_out, 0, heat, outcome, unsafe_flag=unsafe, runtime_ms=list(runtime))


def test_fixture_rates():
    rs = [rec("success", heat=i) for i in range(9)] + [rec("timeout", heat=9)]
    s = summarize(rs)
    assert (s.sr, s.timeout, s.coll, s.offtrk, s.unsafe, s.sr_safe) == (0.9, 0.1, 0.0, 0.0, 0.0, 0.9)


def test_mixed_fixture():
    outs = ["success"] * 5 + ["collision"] * 2 + ["offtrack", "timeout", "timeout"]
    unsafe = [True, False, False, False, False, True, False, False, False, True]
    s = summarize([rec(o, u, heat=i) for i, (o, u) in enumerate(zip(outs, unsafe))])
    assert s.sr == 0.5 and s.coll == 0.2 and s.offtrk == 0.1 and s.timeout == 0.2
    assert s.unsafe == 0.3 and s.sr_safe == 0.4
    assert s.sr + s.coll + s.offtrk + s.timeout + s.error == pytest.approx(1.0)


@given(st.lists(st.tuples(st.sampled_from(["success", "collision", "offtrack", "timeout"]), st.booleans()), min_size=1, max_size=20))
def test_partition_and_unsafe_independence(items):
    rs = [rec(o, u, heat=i) for i, (o, u) in enumerate(items)]
    s = summarize(rs)
    assert s.sr + s.coll + s.offtrk + s.timeout == pytest.approx(1.0, abs=1e-12)
    assert s.sr_safe <= s.sr
    flipped = summarize([rec(o, not u, heat=i) for i, (o, u) in enumerate(items)])
    assert flipped.sr == s.sr


def test_runtime_stats_skip_warmup_for_worst():
    r = rec("success", runtime=[50.0] + [1.0] * 20)
    s = summarize([r])
    assert s.runtime_worst_ms == 1.0
    assert s.runtime_mean_ms == pytest.approx(70.0 / 21)
    assert s.runtime_samples == 21
    assert summarize([r], warmup=0).runtime_worst_ms == 50.0


def test_empty_and_mixed_groups():
    with pytest.raises(EmptyGroup):
        summarize([])
    with pytest.raises(ValueError):
        summarize([rec("success", method="a"), rec("success", method="b")])
    out = summarize_all([rec("success", method="a"), rec("timeout", method="b"), rec("success", method="a", p_out=0.4)])
    assert [(s.method, s.p_out, s.n) for s in out] == [("a", 0.0, 1), ("a", 0.4, 1), ("b", 0.0, 1)]


def test_json_round_trip(tmp_path):
    r = HeatRecord("arbiter", "eval", 0.2, 1, 3, "success", True, False, 10, 0.33, math.inf, [1.0, 2.0], [0.1], [(0.1, "pass")])
    path = tmp_path / "r.jsonl"
    path.write_text(r.to_json() + "\n")
    back = read_records(path)[0]
    assert back.min_clearance == math.inf
    assert back.replay_key() == r.replay_key()
    assert "runtime_ms" not in r.replay_key()
