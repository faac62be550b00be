import csv
import re

import pytest

import gatedrive.harness as harness
from gatedrive.config import ConfigError, load_scenario
from gatedrive.harness import InsufficientData, SweepGrid, emit_curves, run_batch, run_sweep, svg_line_chart
from gatedrive.metrics import MetricsSummary, read_records


def summary(method, p, sr_safe, to=0.0, unsafe=0.0, ms=1.0):
    return MetricsSummary(method, p, 10, sr_safe, 0.0, 0.0, to, 0.0, unsafe, sr_safe, ms, ms * 2, 100)


def test_grid_from_section_and_desk():
    items = {"methods": "arbiter, mpc", "p_out": "0.0,0.2,0.4", "seeds": "0,1,2", "heats": "10", "desk_p_out": "0.0,0.4", "desk_seeds": "0,1", "desk_heats": "5"}
    full = SweepGrid.from_section(items)
    desk = SweepGrid.from_section(items, desk=True)
    assert full.size == 2 * 3 * 3 * 10
    assert desk == SweepGrid(("arbiter", "mpc"), (0.0, 0.4), (0, 1), 5)
    assert len(list(desk.jobs())) == desk.size


@pytest.mark.parametrize("kw", [{"methods": ("nope",)}, {"heats": 0}, {"p_out": (1.5,)}, {"seeds": ()}])
def test_grid_validation(kw):
    with pytest.raises(ConfigError):
        SweepGrid(**kw)


def tiny():
    return load_scenario("eval_impaired", overlays=[{"scenario": {"heat_timeout": "0.5"}}])


def test_every_job_yields_a_record_even_on_failure(monkeypatch):
    real = harness.run_heat

    def flaky(sc, ctl, seed, heat, method=None):
        if heat == 1:
            raise RuntimeError("boom")
        return real(sc, ctl, seed, heat, method=method)

    monkeypatch.setattr(harness, "run_heat", flaky)
    jobs = [("pure_pursuit", 0.0, 0, h) for h in range(3)]
    recs = run_batch(tiny(), jobs)
    assert [r.heat for r in recs] == [0, 1, 2]
    assert recs[1].outcome == "error" and "boom" in recs[1].error
    assert recs[0].outcome == "timeout"


def test_sweep_writes_outputs(tmp_path):
    grid = SweepGrid(("pure_pursuit", "mpc"), (0.0, 0.4), (0,), 1)
    recs, sums = run_sweep(tiny(), grid, out_dir=tmp_path)
    assert len(recs) == grid.size == len(read_records(tmp_path / "records.jsonl"))
    assert {(s.method, s.p_out) for s in sums} == {(m, p) for m in grid.methods for p in grid.p_out}
    for name in ("summary.csv", "runtime_hist.csv", "curves_sr_safe.csv", "fig_robustness_safe_success.svg"):
        assert (tmp_path / name).exists()
    # each grid point shares impairment settings across methods
    assert {r.p_out for r in recs if r.method == "mpc"} == {r.p_out for r in recs if r.method == "pure_pursuit"}


def test_curves_single_method_three_points(tmp_path):
    sums = [summary("arbiter", p, v) for p, v in ((0.0, 1.0), (0.2, 0.8), (0.4, 0.5))]
    emit_curves(sums, tmp_path)
    with open(tmp_path / "curves_sr_safe.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert [float(r["sr_safe"]) for r in rows] == [1.0, 0.8, 0.5]
    svg = (tmp_path / "fig_robustness_safe_success.svg").read_text()
    pts = re.search(r'data-series="arbiter"[^>]*points="([^"]+)"', svg).group(1).split()
    ys = [float(p.split(",")[1]) for p in pts]
    xs = [float(p.split(",")[0]) for p in pts]
    # monotone data, monotone polyline (svg y grows downward)
    assert xs == sorted(xs) and ys == sorted(ys)


def test_curves_need_two_levels(tmp_path):
    with pytest.raises(InsufficientData):
        emit_curves([summary("a", 0.0, 1.0)], tmp_path)
    with pytest.raises(InsufficientData):
        emit_curves([], tmp_path)


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    svg = svg_line_chart({"a": [(0.0, 0.5), (1.0, 0.2)], "b:unsafe": [(0.0, 0.1), (1.0, 0.3)]}, "t", "y", True)
    root = ET.fromstring(svg)
    lines = root.findall("{http://www.w3.org/2000/svg}polyline")
    assert [el.get("data-series") for el in lines] == ["a", "b:unsafe"]


def test_unknown_method_and_missing_policy():
    with pytest.raises(ConfigError):
        harness.make_controller("nope", tiny())
    with pytest.raises(ConfigError):
        harness.make_controller("arbiter", tiny(), None)
    with pytest.raises(ConfigError):
        harness.resolve_policy("/no/such/file.npz")
