from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest
from click.testing import CliRunner

from conftest import FIXTURES
from trilang.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def _fixture(name: str) -> str:
    return str(FIXTURES / name / "manifest.json")


def test_check_clean_fixture_exits_zero(runner):
    result = runner.invoke(main, ["check", _fixture("bridge")])
    assert result.exit_code == 0
    assert result.stdout == ""


def test_check_reports_diagnostics(runner, tmp_path):
    shutil.copytree(FIXTURES / "bridge", tmp_path / "prog")
    (tmp_path / "prog" / "mid.poly").write_text(
        "unit mid;\nfunc start() { x = y + y; y = i.get(); return x; }\n"
    )
    result = runner.invoke(main, ["check", str(tmp_path / "prog" / "manifest.json")])
    assert result.exit_code == 1
    assert "read before assignment" in result.stderr


def test_run_writes_trace(runner, tmp_path):
    out = tmp_path / "trace.json"
    result = runner.invoke(main, ["run", _fixture("asmtaint"), "--trace", str(out)])
    assert result.exit_code == 0
    assert "outcome: completed steps: 6" in result.stdout
    data = json.loads(out.read_text())
    assert data["outcome"] == "completed"
    assert data["trace"]["taint_flows"] == [
        {"source": "entry:main:0", "sink": "entry:main:2"}
    ]


def test_run_step_limit_exit_code(runner):
    result = runner.invoke(main, ["run", _fixture("threehop"), "--steps", "2"])
    assert result.exit_code == 1
    assert "step-limit-exceeded" in result.stdout


def test_callgraph_dot_contains_bridge_callback(runner):
    result = runner.invoke(main, ["callgraph", _fixture("bridge"), "--mode", "cha",
                                  "--format", "dot"])
    assert result.exit_code == 0
    assert 'label="bridge-callback"' in result.stdout
    assert result.stdout.startswith("digraph callgraph {")


def test_callgraph_pts_json_and_unreachable_flag(runner):
    plain = runner.invoke(main, ["callgraph", _fixture("bridge"), "--mode", "pts",
                                 "--format", "json"])
    assert plain.exit_code == 0
    data = json.loads(plain.stdout)
    assert "entry/entry.spare" not in data["nodes"]
    wide = runner.invoke(main, ["callgraph", _fixture("bridge"), "--mode", "pts",
                                "--format", "json", "--include-unreachable"])
    assert "entry/entry.spare" in json.loads(wide.stdout)["nodes"]


def test_analyze_is_byte_reproducible(runner, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert runner.invoke(main, ["analyze", _fixture("threehop"), "--out", str(a)]).exit_code == 0
    assert runner.invoke(main, ["analyze", _fixture("threehop"), "--out", str(b)]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    data = json.loads(a.read_text())
    assert data["taint_flows"] == [{"sink": "entry:main:5", "source": "entry:main:0"}]
    assert data["iterations"] >= 1


def test_gen_is_byte_reproducible(runner, tmp_path):
    d1, d2 = tmp_path / "one", tmp_path / "two"
    assert runner.invoke(main, ["gen", "--seed", "5", "--out", str(d1)]).exit_code == 0
    assert runner.invoke(main, ["gen", "--seed", "5", "--out", str(d2)]).exit_code == 0
    files1 = sorted(p.name for p in d1.iterdir())
    assert files1 == sorted(p.name for p in d2.iterdir())
    for name in files1:
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    check = runner.invoke(main, ["check", str(d1 / "manifest.json")])
    assert check.exit_code == 0


def test_gen_with_config_file(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"middle_units": 0, "asm_modules": 0,
                               "eval_density": 0.0, "asmcall_density": 0.0,
                               "callback_density": 0.0}))
    out = tmp_path / "prog"
    result = runner.invoke(main, ["gen", "--seed", "1", "--config", str(cfg),
                                  "--out", str(out)])
    assert result.exit_code == 0
    assert not list(out.glob("*.asm"))


def test_suite_summary_and_exit(runner, tmp_path):
    report_path = tmp_path / "report.json"
    result = runner.invoke(main, ["suite", "--seeds", "0..4",
                                  "--out", str(report_path)])
    assert result.exit_code == 0
    assert "0 violations across 5 seeds" in result.stdout
    assert json.loads(report_path.read_text())["checked"] == 5


def test_suite_figures(runner, tmp_path):
    figdir = tmp_path / "figs"
    result = runner.invoke(main, ["suite", "--seeds", "0..2", "--figures", str(figdir)])
    assert result.exit_code == 0
    assert (figdir / "suite.csv").exists()
    assert (figdir / "suite_edges.png").exists()


def test_suite_bad_range_is_usage_error(runner):
    assert runner.invoke(main, ["suite", "--seeds", "oops"]).exit_code == 2
    assert runner.invoke(main, ["suite", "--seeds", "9..3"]).exit_code == 2


def test_incr_flow(runner, tmp_path):
    baseline = tmp_path / "baseline.json"
    assert runner.invoke(main, ["analyze", _fixture("threehop"),
                                "--out", str(baseline)]).exit_code == 0
    edit_file = tmp_path / "edit.txt"
    edit_file.write_text(
        "file: cmod.asm\nfunction: id\n---\n{ local l1\n  l1 <- const 0\n  ret l1 }\n"
    )
    out = tmp_path / "updated.json"
    result = runner.invoke(main, ["incr", _fixture("threehop"),
                                  "--baseline", str(baseline),
                                  "--edit", str(edit_file), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "edited: bottom/cmod.id" in result.stdout
    updated = json.loads(out.read_text())
    assert updated["taint_flows"] == []


def test_incr_rejects_stale_baseline(runner, tmp_path):
    baseline = tmp_path / "baseline.json"
    assert runner.invoke(main, ["analyze", _fixture("bridge"),
                                "--out", str(baseline)]).exit_code == 0
    edit_file = tmp_path / "edit.txt"
    edit_file.write_text("file: cmod.asm\nfunction: id\n---\n{ ret l }\n")
    result = runner.invoke(main, ["incr", _fixture("threehop"),
                                  "--baseline", str(baseline),
                                  "--edit", str(edit_file)])
    assert result.exit_code == 1
    assert "does not match" in result.stderr


def test_precision_flow(runner, tmp_path):
    static = tmp_path / "result.json"
    trace = tmp_path / "trace.json"
    report = tmp_path / "report.json"
    figdir = tmp_path / "figs"
    assert runner.invoke(main, ["analyze", _fixture("chagap"),
                                "--out", str(static)]).exit_code == 0
    assert runner.invoke(main, ["run", _fixture("chagap"),
                                "--trace", str(trace)]).exit_code == 0
    result = runner.invoke(main, ["precision", _fixture("chagap"),
                                  "--static", str(static), "--trace", str(trace),
                                  "--out", str(report), "--figures", str(figdir)])
    assert result.exit_code == 0, result.output
    data = json.loads(report.read_text())
    assert data["sound"] is True
    assert (figdir / "spurious_by_hop.png").exists()


def test_unknown_flag_rejected(runner):
    assert runner.invoke(main, ["check", "--bogus", "x"]).exit_code == 2


def test_unknown_subcommand_rejected(runner):
    assert runner.invoke(main, ["frobnicate"]).exit_code == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "trilang.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "Static analysis toolkit" in proc.stdout
