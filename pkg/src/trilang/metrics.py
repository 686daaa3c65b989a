"""Corpus-level soundness checking and precision measurement.

The soundness suite generates programs over a seed range, runs each one to
collect the dynamic oracle, analyzes it, and reports every dynamic edge or
taint flow the static result misses. A violation is data, not an exception:
the offending program is serialized next to the report for replay.

Precision is measured as spurious results: static-only edges counted per
mechanism and per boundary-hop depth, where the hop depth of an edge is the
minimal number of boundary crossings (eval, asmcall, bridge callback) on any
static path from the entry function to the caller. That split shows how far
from the entry language the imprecision lives, which is the question the
depth metric exists to answer. The metric is this artifact's own; see the
README notes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Union

from .callgraph import CallGraph, Edge
from .dataflow import AnalysisResult, mutual_fixpoint
from .generator import GenConfig, ProgramSources, generate_sources, link_sources
from .interp import DEFAULT_STEP_LIMIT, DynamicTrace, run
from .linker import (
    MECH_ASMCALL, MECH_BRIDGE, MECH_EVAL, MECHANISMS, NodeId, PolyglotProgram,
)

_BOUNDARY_MECHS = {MECH_EVAL, MECH_ASMCALL, MECH_BRIDGE}
_HOP_BUCKETS = ("0", "1", "2", "3+")


def hop_depths(graph: CallGraph) -> dict[NodeId, int]:
    """Minimal boundary crossings from the entry to each node (0-1 BFS)."""
    if graph.entry is None:
        return {}
    adjacency: dict[NodeId, list[tuple[NodeId, int]]] = {}
    for caller, _site, callee, mech in graph.edges:
        weight = 1 if mech in _BOUNDARY_MECHS else 0
        adjacency.setdefault(caller, []).append((callee, weight))
    dist: dict[NodeId, int] = {graph.entry: 0}
    queue: deque[NodeId] = deque([graph.entry])
    while queue:
        cur = queue.popleft()
        for nxt, weight in sorted(adjacency.get(cur, ()),
                                  key=lambda p: (p[0].key, p[1])):
            cand = dist[cur] + weight
            if nxt not in dist or cand < dist[nxt]:
                dist[nxt] = cand
                if weight == 0:
                    queue.appendleft(nxt)
                else:
                    queue.append(nxt)
    return dist


def _bucket(depth: Optional[int]) -> str:
    if depth is None or depth >= 3:
        return "3+"
    return str(depth)


@dataclass
class PrecisionReport:
    """Static-versus-dynamic counts for one program."""

    per_mechanism: dict[str, dict[str, int]]   # mech -> static/dynamic/spurious
    per_hop: dict[str, int]                    # hop bucket -> spurious edges
    taint: dict[str, int]                      # static/dynamic/spurious flows
    sound: bool
    unsound_edges: tuple[str, ...] = ()
    unsound_flows: tuple[str, ...] = ()

    @property
    def spurious_edges(self) -> int:
        return sum(c["spurious"] for c in self.per_mechanism.values())

    def to_json_dict(self) -> dict:
        return {
            "per_mechanism": {m: dict(c) for m, c in sorted(self.per_mechanism.items())},
            "per_hop": {k: self.per_hop.get(k, 0) for k in _HOP_BUCKETS},
            "taint": dict(self.taint),
            "sound": self.sound,
            "unsound_edges": list(self.unsound_edges),
            "unsound_flows": list(self.unsound_flows),
        }

    def csv_rows(self) -> list[list]:
        rows: list[list] = [["kind", "key", "static", "dynamic", "spurious"]]
        for mech in sorted(self.per_mechanism):
            c = self.per_mechanism[mech]
            rows.append(["mechanism", mech, c["static"], c["dynamic"], c["spurious"]])
        for bucket in _HOP_BUCKETS:
            rows.append(["hop-depth", bucket, "", "", self.per_hop.get(bucket, 0)])
        rows.append(["taint", "flows", self.taint["static"], self.taint["dynamic"],
                     self.taint["spurious"]])
        return rows


def measure_precision(program: PolyglotProgram, static_graph: CallGraph,
                      static_flows: Iterable[tuple[str, str]],
                      traces: Iterable[DynamicTrace]) -> PrecisionReport:
    """Compare static edges and flows against one or more dynamic traces."""
    traces = list(traces)
    if not traces:
        raise ValueError("measure_precision needs at least one trace")
    dynamic_edges: set[Edge] = set()
    dynamic_flows: set[tuple[str, str]] = set()
    for trace in traces:
        dynamic_edges |= trace.call_edges
        dynamic_flows |= trace.taint_flows
    static_edges = set(static_graph.edges)
    static_flow_set = set(static_flows)

    unsound_edges = dynamic_edges - static_edges
    unsound_flows = dynamic_flows - static_flow_set
    sound = not unsound_edges and not unsound_flows

    per_mechanism = {
        mech: {"static": 0, "dynamic": 0, "spurious": 0} for mech in MECHANISMS
    }
    for edge in static_edges:
        per_mechanism[edge[3]]["static"] += 1
    for edge in dynamic_edges:
        per_mechanism.setdefault(edge[3], {"static": 0, "dynamic": 0, "spurious": 0})
        per_mechanism[edge[3]]["dynamic"] += 1

    depths = hop_depths(static_graph)
    per_hop = {k: 0 for k in _HOP_BUCKETS}
    for edge in static_edges - dynamic_edges:
        per_mechanism[edge[3]]["spurious"] += 1
        per_hop[_bucket(depths.get(edge[0]))] += 1

    taint = {
        "static": len(static_flow_set),
        "dynamic": len(dynamic_flows),
        "spurious": len(static_flow_set - dynamic_flows),
    }
    return PrecisionReport(
        per_mechanism=per_mechanism,
        per_hop=per_hop,
        taint=taint,
        sound=sound,
        unsound_edges=tuple(sorted(f"{c.key} {s} -> {t.key} [{m}]"
                                   for c, s, t, m in unsound_edges)),
        unsound_flows=tuple(sorted(f"{a} -> {b}" for a, b in unsound_flows)),
    )


@dataclass
class SeedRecord:
    seed: int
    outcome: str
    static_edges: int
    dynamic_edges: int
    static_flows: int
    dynamic_flows: int
    missing_edges: tuple[str, ...] = ()
    missing_flows: tuple[str, ...] = ()
    iterations: int = 0
    counterexample: Optional[str] = None

    @property
    def violated(self) -> bool:
        return bool(self.missing_edges or self.missing_flows)

    def to_json_dict(self) -> dict:
        out = {
            "seed": self.seed,
            "outcome": self.outcome,
            "static_edges": self.static_edges,
            "dynamic_edges": self.dynamic_edges,
            "static_flows": self.static_flows,
            "dynamic_flows": self.dynamic_flows,
            "iterations": self.iterations,
        }
        if self.violated:
            out["missing_edges"] = list(self.missing_edges)
            out["missing_flows"] = list(self.missing_flows)
        if self.counterexample:
            out["counterexample"] = self.counterexample
        return out


@dataclass
class SuiteReport:
    records: list[SeedRecord] = field(default_factory=list)

    @property
    def violations(self) -> list[SeedRecord]:
        return [r for r in self.records if r.violated]

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary_line(self) -> str:
        return (f"{len(self.violations)} violations across "
                f"{len(self.records)} seeds")

    def to_json_dict(self) -> dict:
        return {
            "checked": len(self.records),
            "violations": len(self.violations),
            "records": [r.to_json_dict() for r in self.records],
        }

    def csv_rows(self) -> list[list]:
        rows = [["seed", "outcome", "static_edges", "dynamic_edges",
                 "static_flows", "dynamic_flows", "violated"]]
        for r in self.records:
            rows.append([r.seed, r.outcome, r.static_edges, r.dynamic_edges,
                         r.static_flows, r.dynamic_flows, int(r.violated)])
        return rows


def check_seed(seed: int, config: GenConfig, *, step_limit: int = DEFAULT_STEP_LIMIT,
               disable_bridge_callbacks: bool = False,
               dump_dir: Optional[Union[str, Path]] = None
               ) -> tuple[SeedRecord, ProgramSources, AnalysisResult]:
    """Generate, run, analyze one seed; record any dynamic-not-static facts."""
    cfg = replace(config, seed=seed)
    sources = generate_sources(cfg)
    program = link_sources(sources)
    dynamic = run(program, step_limit)
    result = mutual_fixpoint(program,
                             disable_bridge_callbacks=disable_bridge_callbacks)
    missing_edges = dynamic.trace.call_edges - result.graph.edges
    missing_flows = dynamic.trace.taint_flows - result.taint_flows
    record = SeedRecord(
        seed=seed,
        outcome=dynamic.outcome,
        static_edges=len(result.graph.edges),
        dynamic_edges=len(dynamic.trace.call_edges),
        static_flows=len(result.taint_flows),
        dynamic_flows=len(dynamic.trace.taint_flows),
        missing_edges=tuple(sorted(f"{c.key} {s} -> {t.key} [{m}]"
                                   for c, s, t, m in missing_edges)),
        missing_flows=tuple(sorted(f"{a} -> {b}" for a, b in missing_flows)),
        iterations=result.iterations,
    )
    if record.violated and dump_dir is not None:
        target = Path(dump_dir) / f"seed{seed}"
        sources.write(target)
        record.counterexample = str(target)
    return record, sources, result


def soundness_suite(seeds: Iterable[int], config: Optional[GenConfig] = None, *,
                    step_limit: int = DEFAULT_STEP_LIMIT,
                    disable_bridge_callbacks: bool = False,
                    dump_dir: Optional[Union[str, Path]] = None) -> SuiteReport:
    """Dynamic-subset-of-static check over a seed range; violations are data."""
    config = config or GenConfig()
    report = SuiteReport()
    for seed in seeds:
        record, _sources, _result = check_seed(
            seed, config, step_limit=step_limit,
            disable_bridge_callbacks=disable_bridge_callbacks, dump_dir=dump_dir,
        )
        report.records.append(record)
    return report
