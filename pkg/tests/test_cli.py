import hashlib
import json
from pathlib import Path

import pytest

from gatedrive.cli import main
from gatedrive.config import bundled_scenario
from gatedrive.metrics import read_records


def short_scenario(tmp_path):
    f = tmp_path / "short.ini"
    f.write_text(f"[scenario]\ninclude = {bundled_scenario('eval_impaired')}\nname = short\nheat_timeout = 0.5\n")
    return f


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "train" in capsys.readouterr().out


def test_unknown_subcommand_is_usage_error():
    assert main(["fly"]) == 2
    assert main([]) == 2


def test_config_error_status(tmp_path):
    assert main(["eval", "--scenario", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nheats = lots\n")
    assert main(["eval", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 3


def test_eval_writes_manifest_and_records(tmp_path):
    sc = short_scenario(tmp_path)
    out = tmp_path / "run"
    assert main(["--seed", "4", "eval", "--scenario", str(sc), "--method", "pure_pursuit", "--heats", "2", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["seeds"] == [4]
    assert man["finished"] >= man["started"]
    for path, digest in man["config_hashes"].items():
        assert hashlib.sha256(Path(path).read_bytes()).hexdigest() == digest
    assert str(sc) in man["config_hashes"]
    recs = read_records(out / "records.jsonl")
    assert [(r.seed, r.heat) for r in recs] == [(4, 0), (4, 1)]

    again = tmp_path / "again"
    assert main(["--seed", "4", "eval", "--scenario", str(sc), "--method", "pure_pursuit", "--heats", "2", "--out", str(again)]) == 0
    assert [r.replay_key() for r in read_records(again / "records.jsonl")] == [r.replay_key() for r in recs]


def test_sweep_and_plot(tmp_path):
    sc = tmp_path / "grid.ini"
    sc.write_text(
        f"[scenario]\ninclude = {bundled_scenario('sweep')}\nheat_timeout = 0.5\n"
        "[sweep]\nmethods = pure_pursuit\np_out = 0.0, 0.4\nseeds = 0\nheats = 1\n"
    )
    out = tmp_path / "sweep"
    assert main(["sweep", "--grid", str(sc), "--out", str(out)]) == 0
    assert (out / "fig_robustness_safe_success.svg").exists()
    plots = tmp_path / "plots"
    assert main(["plot", "--in", str(out), "--out", str(plots)]) == 0
    assert (plots / "curves_sr_safe.csv").exists()
    assert json.loads((plots / "manifest.json").read_text())["status"] == "ok"


def test_plot_with_one_level_fails(tmp_path):
    sc = short_scenario(tmp_path)
    out = tmp_path / "run"
    assert main(["eval", "--scenario", str(sc), "--method", "pure_pursuit", "--seeds", "0", "--heats", "1", "--out", str(out)]) == 0
    assert main(["plot", "--in", str(out), "--out", str(tmp_path / "p")]) == 1
    assert json.loads((tmp_path / "p" / "manifest.json").read_text())["status"] == "error"


def test_verify_subset(capsys):
    assert main(["verify", "gae", "unsafe"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["verify", "nonsense"]) == 2
