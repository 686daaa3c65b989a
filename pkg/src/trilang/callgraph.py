"""Cross-language call graphs: name-based (CHA-style) and points-to driven.

Both builders start at the entry function and add nodes reachability-first.
The name-based mode resolves `v.m()` to every program type declaring `m`
(there is no subtyping, so the subtype set degenerates to the name-compatible
set) and resolves calls on free bridge names against every bridge-capable
type. The points-to mode delegates to the dataflow engine and keeps only
callees whose allocation reaches the receiver, which is where the precision
gain over the name-based graph comes from.

Edge tuples are (caller, site, callee, mechanism) and compare exactly against
DynamicTrace edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, TYPE_CHECKING

from .asmlang import Call
from .hostlang import AsmCall, Eval, MethodCall
from .interp import DynamicTrace
from .linker import (
    MECH_ASM_DIRECT, MECH_ASMCALL, MECH_BRIDGE, MECH_DIRECT, MECH_EVAL,
    NodeId, PolyglotProgram,
)

if TYPE_CHECKING:  # pragma: no cover
    from .dataflow import AnalysisResult

Edge = tuple[NodeId, str, NodeId, str]


@dataclass
class CallGraph:
    """Provenance-labeled nodes, mechanism-labeled edges."""

    nodes: set[NodeId] = field(default_factory=set)
    edges: set[Edge] = field(default_factory=set)
    universe: tuple[NodeId, ...] = ()
    entry: NodeId | None = None

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges, key=_edge_key)

    def to_json_dict(self) -> dict:
        return {
            "entry": self.entry.key if self.entry else None,
            "nodes": [n.key for n in sorted(self.nodes)],
            "edges": [
                {"caller": c.key, "site": s, "callee": t.key, "mechanism": m}
                for c, s, t, m in self.sorted_edges()
            ],
        }

    def to_dot(self) -> str:
        lines = ["digraph callgraph {"]
        for n in sorted(self.nodes):
            lines.append(f'  "{n.key}" [label="{n.key}"];')
        for c, s, t, m in self.sorted_edges():
            lines.append(f'  "{c.key}" -> "{t.key}" [label="{m}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _edge_key(e: Edge) -> tuple[str, str, str, str]:
    return (e[0].key, e[1], e[2].key, e[3])


def _method_candidates(program: PolyglotProgram, method: str,
                       scope: Iterable[tuple[str, str]]) -> list[tuple[str, NodeId]]:
    """(declaring unit, target function node) for every type in scope with `method`."""
    out = []
    for unit_name, type_name in sorted(scope):
        decl = program.types[(unit_name, type_name)]
        target = decl.method_map().get(method)
        if target is not None:
            out.append((unit_name, program.node_for(unit_name, target)))
    return out


def build_cha(program: PolyglotProgram, include_unreachable: bool = False) -> CallGraph:
    """Name-based call graph: no dataflow facts consulted."""
    graph = CallGraph(universe=program.universe(), entry=program.entry_node)
    all_types = sorted(program.types)
    worklist = [program.entry_node]
    while worklist:
        node = worklist.pop()
        if node in graph.nodes:
            continue
        graph.nodes.add(node)
        for callee, site, mech in _cha_out_edges(program, node, all_types):
            graph.edges.add((node, site, callee, mech))
            if callee not in graph.nodes:
                worklist.append(callee)
    if include_unreachable:
        graph.nodes.update(graph.universe)
    return graph


def _cha_out_edges(program: PolyglotProgram, node: NodeId,
                   all_types: list[tuple[str, str]]) -> list[tuple[NodeId, str, str]]:
    out: list[tuple[NodeId, str, str]] = []
    if node in program.procs:
        info = program.proc_info(node)
        for idx, li in enumerate(info.decl.body):
            if isinstance(li.instr, Call):
                module = li.instr.module or info.module_name
                out.append((NodeId("bottom", module, li.instr.proc),
                            info.site(idx), MECH_ASM_DIRECT))
        return out
    info = program.host_info(node)
    for stmt in info.stmts:
        if isinstance(stmt, MethodCall):
            site = info.site(stmt)
            if stmt.receiver in info.free:
                # Bridge receiver: all bridge-capable types, no host facts used.
                scope: Iterable[tuple[str, str]] = program.bridge_capable
            else:
                scope = all_types
            for unit_name, callee in _method_candidates(program, stmt.method, scope):
                mech = MECH_DIRECT if unit_name == info.unit_name else MECH_BRIDGE
                out.append((callee, site, mech))
        elif isinstance(stmt, Eval):
            binding = program.bindings.eval_sites[info.site(stmt)]
            out.append((program.node_for(binding.unit, binding.function),
                        binding.site, MECH_EVAL))
        elif isinstance(stmt, AsmCall):
            binding = program.bindings.asm_sites[info.site(stmt)]
            out.append((NodeId("bottom", binding.module, binding.proc),
                        binding.site, MECH_ASMCALL))
    return out


def build_onthefly(program: PolyglotProgram, include_unreachable: bool = False,
                   **engine_options) -> tuple[CallGraph, "AnalysisResult"]:
    """Points-to-driven call graph, built jointly with the dataflow fixpoint."""
    from .dataflow import mutual_fixpoint

    result = mutual_fixpoint(program, **engine_options)
    graph = result.graph
    if include_unreachable:
        graph = CallGraph(nodes=set(graph.nodes) | set(graph.universe),
                          edges=set(graph.edges), universe=graph.universe,
                          entry=graph.entry)
    return graph, result


def trace_to_graph(program: PolyglotProgram, trace: DynamicTrace) -> CallGraph:
    """Promote a dynamic trace to a graph for diffing against static results."""
    graph = CallGraph(universe=program.universe(), entry=program.entry_node)
    graph.nodes.add(program.entry_node)
    for caller, site, callee, mech in trace.call_edges:
        graph.nodes.add(caller)
        graph.nodes.add(callee)
        graph.edges.add((caller, site, callee, mech))
    return graph


@dataclass
class GraphDiff:
    """Edge partition of two graphs over the same program, split by mechanism."""

    only_a: dict[str, tuple[Edge, ...]]
    only_b: dict[str, tuple[Edge, ...]]
    both: dict[str, tuple[Edge, ...]]

    @property
    def empty(self) -> bool:
        return not any(self.only_a.values()) and not any(self.only_b.values())

    def count_only_a(self) -> int:
        return sum(len(v) for v in self.only_a.values())

    def count_only_b(self) -> int:
        return sum(len(v) for v in self.only_b.values())


def diff_graphs(a: CallGraph, b: CallGraph) -> GraphDiff:
    """Partition edges into a-only, b-only, and shared, grouped by mechanism."""
    if a.universe != b.universe:
        raise ValueError("node universes differ; the graphs describe different programs")

    def group(edges: set[Edge]) -> dict[str, tuple[Edge, ...]]:
        grouped: dict[str, list[Edge]] = {}
        for e in sorted(edges, key=_edge_key):
            grouped.setdefault(e[3], []).append(e)
        return {m: tuple(v) for m, v in grouped.items()}

    return GraphDiff(
        only_a=group(a.edges - b.edges),
        only_b=group(b.edges - a.edges),
        both=group(a.edges & b.edges),
    )
