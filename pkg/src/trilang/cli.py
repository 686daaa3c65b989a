"""Command-line driver.

Batch, non-interactive: every subcommand reads files, writes files or stdout,
and exits 0 on success, 1 when diagnostics or violations were found, and 2 on
usage errors. Structured outputs are JSON with stable ordering, so identical
invocations on identical inputs produce byte-identical files; graphs can also
be exported as DOT. The `suite` and `precision` report paths optionally
render figures (PNG plus a CSV of the same numbers) with `--figures`.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click

from .callgraph import CallGraph, build_cha, build_onthefly
from .dataflow import mutual_fixpoint
from .diagnostics import LinkError, ParseError
from .generator import GenConfig, generate_sources
from .incremental import EditError, edit_from_spec, parse_edit_spec, reanalyze
from .interp import DEFAULT_STEP_LIMIT, DynamicTrace, node_from_key, run
from .linker import PolyglotProgram, link, load_manifest
from .metrics import measure_precision, soundness_suite


def _dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _load_program(manifest_path: str) -> PolyglotProgram:
    try:
        manifest = load_manifest(manifest_path)
        return link(manifest)
    except (ParseError, LinkError) as exc:
        _fail_diagnostics(exc)


def _fail_diagnostics(exc: Exception) -> None:
    if isinstance(exc, ParseError):
        click.echo(str(exc.diagnostic), err=True)
    elif isinstance(exc, LinkError):
        for diag in exc.diagnostics:
            click.echo(str(diag), err=True)
    else:  # pragma: no cover
        click.echo(str(exc), err=True)
    sys.exit(1)


@click.group()
def main() -> None:
    """Static analysis toolkit for three-language polyglot programs."""


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
def check(manifest: str) -> None:
    """Parse, check, and link everything the manifest names."""
    _load_program(manifest)


@main.command(name="run")
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--steps", type=int, default=DEFAULT_STEP_LIMIT, show_default=True,
              help="Small-step budget before the run is cut off.")
@click.option("--trace", "trace_out", type=click.Path(), default=None,
              help="Write the run result (outcome plus trace) as JSON.")
def run_cmd(manifest: str, steps: int, trace_out: str | None) -> None:
    """Execute the program and record its dynamic trace."""
    program = _load_program(manifest)
    result = run(program, step_limit=steps)
    if trace_out:
        Path(trace_out).write_text(_dump_json(result.to_json_dict()), encoding="utf-8")
    line = f"outcome: {result.outcome} steps: {result.trace.steps}"
    if result.fault:
        line += f" fault: {result.fault}"
    click.echo(line)
    sys.exit(0 if result.outcome == "completed" else 1)


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["cha", "pts"]), required=True,
              help="Name-based or points-to-driven resolution.")
@click.option("--format", "fmt", type=click.Choice(["dot", "json"]), default="dot",
              show_default=True)
@click.option("--include-unreachable", is_flag=True,
              help="Add unreachable declarations as isolated nodes.")
@click.option("--out", type=click.Path(), default=None,
              help="Write here instead of stdout.")
def callgraph(manifest: str, mode: str, fmt: str, include_unreachable: bool,
              out: str | None) -> None:
    """Build the cross-language call graph."""
    program = _load_program(manifest)
    if mode == "cha":
        graph = build_cha(program, include_unreachable=include_unreachable)
    else:
        graph, _result = build_onthefly(program, include_unreachable=include_unreachable)
    text = graph.to_dot() if fmt == "dot" else _dump_json(graph.to_json_dict())
    _emit(text, out)


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="Write the analysis result JSON here instead of stdout.")
def analyze(manifest: str, out: str | None) -> None:
    """Run the summary-based points-to and taint analysis to a fixed point."""
    program = _load_program(manifest)
    result = mutual_fixpoint(program)
    _emit(_dump_json(result.to_json_dict()), out)


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--baseline", type=click.Path(exists=True), required=True,
              help="Analysis result JSON for the unedited program.")
@click.option("--edit", "edit_path", type=click.Path(exists=True), required=True,
              help="Edit file: 'file:'/'function:' header, '---', new body.")
@click.option("--out", type=click.Path(), default=None,
              help="Write the updated analysis result JSON here.")
def incr(manifest: str, baseline: str, edit_path: str, out: str | None) -> None:
    """Differentially re-analyze after a function-body edit.

    Edits replace exactly one function or procedure body. Changes to type
    declarations, bindings, or the manifest need a full re-link: run
    `analyze` from scratch for those.
    """
    program = _load_program(manifest)
    previous = mutual_fixpoint(program)
    loaded = json.loads(Path(baseline).read_text(encoding="utf-8"))
    loaded.pop("iterations", None)
    if loaded != previous.facts_dict():
        click.echo("baseline result does not match this manifest; rerun analyze",
                   err=True)
        sys.exit(1)
    try:
        rel, function, body = parse_edit_spec(Path(edit_path).read_text(encoding="utf-8"))
        edit = edit_from_spec(program, rel, function, body)
        report = reanalyze(program, previous, edit)
    except EditError as exc:
        _fail_diagnostics(LinkError(exc.diagnostics))
    if out:
        Path(out).write_text(_dump_json(report.result.to_json_dict()), encoding="utf-8")
    click.echo(f"edited: {edit.target.key}")
    click.echo(f"resummarized: {len(report.resummarized)} "
               f"({', '.join(sorted(n.key for n in report.resummarized))})")
    click.echo(f"rounds: {report.rounds} ratio: {report.ratio():.3f}")


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="GenConfig overrides as JSON.")
@click.option("--out", "outdir", type=click.Path(), required=True,
              help="Directory for the .poly/.asm sources and manifest.json.")
def gen(seed: int, config_path: str | None, outdir: str) -> None:
    """Generate a well-formed random program."""
    config = _load_config(config_path, seed)
    sources = generate_sources(config)
    manifest_path = sources.write(outdir)
    click.echo(str(manifest_path))


@main.command()
@click.option("--seeds", "seed_range", required=True,
              help="Inclusive seed range, e.g. 0..499 (or one seed).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None,
              help="Write the suite report JSON here.")
@click.option("--dump", "dump_dir", type=click.Path(), default=None,
              help="Directory for counterexample programs.")
@click.option("--figures", "figures_dir", type=click.Path(), default=None,
              help="Render per-seed charts and a CSV into this directory.")
def suite(seed_range: str, config_path: str | None, out: str | None,
          dump_dir: str | None, figures_dir: str | None) -> None:
    """Soundness suite: dynamic edges and flows must be within static ones."""
    seeds = _parse_seed_range(seed_range)
    config = _load_config(config_path, seeds[0])
    report = soundness_suite(seeds, config, dump_dir=dump_dir)
    if out:
        Path(out).write_text(_dump_json(report.to_json_dict()), encoding="utf-8")
    if figures_dir:
        from .figures import render_suite_figures

        render_suite_figures(report, figures_dir)
    click.echo(report.summary_line())
    sys.exit(0 if report.ok else 1)


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--static", "static_path", type=click.Path(exists=True), required=True,
              help="Analysis result JSON (from `analyze`).")
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True,
              help="Run result or trace JSON (from `run --trace`).")
@click.option("--out", type=click.Path(), default=None,
              help="Write the precision report JSON here instead of stdout.")
@click.option("--figures", "figures_dir", type=click.Path(), default=None,
              help="Render charts and a CSV into this directory.")
def precision(manifest: str, static_path: str, trace_path: str,
              out: str | None, figures_dir: str | None) -> None:
    """Spurious-edge and spurious-flow report, split by mechanism and hop depth."""
    program = _load_program(manifest)
    graph, flows = _load_static(program, static_path)
    trace = _load_trace(trace_path)
    report = measure_precision(program, graph, flows, [trace])
    _emit(_dump_json(report.to_json_dict()), out)
    if figures_dir:
        from .figures import render_precision_figures

        render_precision_figures(report, figures_dir)
    if not report.sound:
        click.echo("warning: dynamic facts outside the static result", err=True)
        sys.exit(1)


def _load_config(config_path: str | None, seed: int) -> GenConfig:
    if config_path is None:
        return GenConfig(seed=seed)
    data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    data.setdefault("seed", seed)
    try:
        return GenConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"bad config: {exc}")


def _parse_seed_range(text: str) -> list[int]:
    match = re.fullmatch(r"(\d+)(?:\.\.(\d+))?", text.strip())
    if not match:
        raise click.UsageError(f"bad seed range {text!r}; expected A..B")
    lo = int(match.group(1))
    hi = int(match.group(2)) if match.group(2) else lo
    if hi < lo:
        raise click.UsageError(f"bad seed range {text!r}; end before start")
    return list(range(lo, hi + 1))


def _load_static(program: PolyglotProgram, path: str) -> tuple[CallGraph, set]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    graph_data = data.get("call_graph", data)
    graph = CallGraph(universe=program.universe(), entry=program.entry_node)
    for node_key in graph_data.get("nodes", []):
        graph.nodes.add(node_from_key(node_key))
    for e in graph_data.get("edges", []):
        graph.edges.add((node_from_key(e["caller"]), e["site"],
                         node_from_key(e["callee"]), e["mechanism"]))
    flows = {(f["source"], f["sink"]) for f in data.get("taint_flows", [])}
    return graph, flows


def _load_trace(path: str) -> DynamicTrace:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return DynamicTrace.from_json_dict(data.get("trace", data))


if __name__ == "__main__":  # pragma: no cover
    main()
