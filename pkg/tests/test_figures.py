from __future__ import annotations

from trilang.callgraph import build_cha
from trilang.dataflow import mutual_fixpoint
from trilang.figures import render_precision_figures, render_suite_figures
from trilang.generator import GenConfig
from trilang.interp import run
from trilang.metrics import measure_precision, soundness_suite


def test_precision_figures_written(tmp_path, bridge_program):
    cha = build_cha(bridge_program)
    result = mutual_fixpoint(bridge_program)
    trace = run(bridge_program).trace
    report = measure_precision(bridge_program, cha, result.taint_flows, [trace])
    written = render_precision_figures(report, tmp_path)
    names = {p.name for p in written}
    assert names == {"precision.csv", "edges_by_mechanism.png", "spurious_by_hop.png"}
    for path in written:
        assert path.exists() and path.stat().st_size > 0
    header = (tmp_path / "precision.csv").read_text().splitlines()[0]
    assert header == "kind,key,static,dynamic,spurious"


def test_suite_figures_written(tmp_path):
    report = soundness_suite(range(4), GenConfig(seed=0))
    written = render_suite_figures(report, tmp_path)
    names = {p.name for p in written}
    assert names == {"suite.csv", "suite_edges.png"}
    assert (tmp_path / "suite.csv").read_text().count("\n") == 5  # header + 4 rows
