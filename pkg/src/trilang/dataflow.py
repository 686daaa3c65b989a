"""Points-to and taint analysis over all three languages at once.

The engine keeps one global fact store (variable and field points-to sets,
taint source sets for variables, object fields, and assembly cells, plus the
resolved call edges) and re-runs per-function transfer functions until
nothing changes. Work is organized in rounds over (component, function)
pairs, where a component is one unit or one assembly module: within a round
each dirty component is solved to its own fixed point against the current
boundary facts, and facts crossing a component boundary take effect in the
next round. The iteration count of a result is the number of such rounds.

All transfers only ever join, so the store grows monotonically and the
fixed point exists; the fact universe is finite (allocation sites x fields x
variables plus a finite taint alphabet), so the engine terminates well below
any sane iteration cap.

Every fact element remembers which functions derived it and every cell
remembers who read it. Those records make differential re-analysis exact
(see the incremental module) and are how consumers get re-queued when a
producer learns something new.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .asmlang import Call, Const, Load, Op, Ret, Store
from .callgraph import CallGraph, Edge
from .hostlang import (
    Alloc, AsmCall, BinOp, BridgeAlloc, ConstAssign, Eval, FieldLoad,
    FieldStore, MethodCall, Return, SinkCall, SourceAssign,
)
from .linker import (
    MECH_ASM_DIRECT, MECH_ASMCALL, MECH_BRIDGE, MECH_DIRECT, MECH_EVAL,
    NodeId, PolyglotProgram,
)
from .summaries import FunctionSummary, compute_summaries

DEFAULT_ITER_CAP = 1000
ITER_CAP_ENV = "TRILANG_ITER_CAP"

RET_VAR = "@ret"


class NonConvergenceError(RuntimeError):
    """The engine hit the iteration cap; treated as a defect, never expected."""


class UnknownVariableError(ValueError):
    """query_points_to was asked about a variable the function does not have."""


@dataclass(frozen=True, order=True)
class AbstractObject:
    """One abstract object per syntactic allocation site."""

    site: str
    unit: str
    type_name: str
    bridge: bool


Cell = tuple  # ("vp", node, var) | ("vt", node, var) | ("fp", site, field) | ...
Fact = tuple  # (cell, element) | ("edge", edge) | ("flow", flow)


class _State:
    """The global fact store plus its provenance and dependency records."""

    def __init__(self) -> None:
        self.cells: dict[Cell, set] = {}
        self.edges: set[Edge] = set()
        self.flows: set[tuple[str, str]] = set()
        self.producers: dict[Fact, set[NodeId]] = {}
        self.writers: dict[Cell, set[NodeId]] = {}
        self.readers: dict[Cell, set[NodeId]] = {}
        self.dep_edges: set[tuple[NodeId, NodeId]] = set()
        self.reachable: set[NodeId] = set()

    def clone(self) -> "_State":
        other = _State()
        other.cells = {k: set(v) for k, v in self.cells.items()}
        other.edges = set(self.edges)
        other.flows = set(self.flows)
        other.producers = {k: set(v) for k, v in self.producers.items()}
        other.writers = {k: set(v) for k, v in self.writers.items()}
        other.readers = {k: set(v) for k, v in self.readers.items()}
        other.dep_edges = set(self.dep_edges)
        other.reachable = set(self.reachable)
        return other

    def size(self) -> int:
        return (sum(len(v) for v in self.cells.values())
                + len(self.edges) + len(self.flows))

    def get(self, cell: Cell) -> set:
        return self.cells.get(cell, set())

    def invalidate(self, affected: set[NodeId]) -> None:
        """Forget every derivation made by an affected function.

        A fact survives if some unaffected function also derived it; the
        affected ones will re-derive whatever still holds when they re-run.
        """
        dead_facts: list[Fact] = []
        for fact, producers in self.producers.items():
            if producers & affected:
                producers -= affected
                if not producers:
                    dead_facts.append(fact)
        for fact in dead_facts:
            del self.producers[fact]
            kind = fact[0]
            if kind == "edge":
                self.edges.discard(fact[1])
            elif kind == "flow":
                self.flows.discard(fact[1])
            else:
                cell, element = fact
                bucket = self.cells.get(cell)
                if bucket is not None:
                    bucket.discard(element)
                    if not bucket:
                        del self.cells[cell]
        for writers in self.writers.values():
            writers -= affected
        self.dep_edges = {(c, p) for c, p in self.dep_edges if c not in affected}


def _resolve_iter_cap(iter_cap: Optional[int]) -> int:
    if iter_cap is not None:
        return iter_cap
    env = os.environ.get(ITER_CAP_ENV)
    return int(env) if env else DEFAULT_ITER_CAP


class _Engine:
    def __init__(self, program: PolyglotProgram, *, iter_cap: Optional[int] = None,
                 debug: bool = False, disable_bridge_callbacks: bool = False,
                 state: Optional[_State] = None):
        self.program = program
        self.iter_cap = _resolve_iter_cap(iter_cap)
        self.debug = debug
        self.disable_bridge_callbacks = disable_bridge_callbacks
        self.state = state if state is not None else _State()
        self.comp_rank = {name: i for i, name in enumerate(program.component_order)}
        self.cur: Optional[NodeId] = None
        self.cur_component: Optional[str] = None
        self.local_changed = False
        self.worklist: set[NodeId] = set()
        self.dirty_next: set[NodeId] = set()
        self.transferred: set[NodeId] = set()

    # -- store access with registration --------------------------------------

    def read(self, cell: Cell) -> set:
        state = self.state
        state.readers.setdefault(cell, set()).add(self.cur)
        for writer in state.writers.get(cell, ()):
            if writer != self.cur:
                state.dep_edges.add((self.cur, writer))
        return state.cells.get(cell, set())

    def write(self, cell: Cell, elements: Iterable) -> None:
        elements = set(elements)
        if not elements:
            return
        state = self.state
        state.writers.setdefault(cell, set()).add(self.cur)
        for e in elements:
            state.producers.setdefault((cell, e), set()).add(self.cur)
        bucket = state.cells.setdefault(cell, set())
        new = elements - bucket
        if not new:
            return
        bucket |= new
        self.local_changed = True
        consumers = set(state.readers.get(cell, ()))
        kind = cell[0]
        if kind in ("vp", "vt"):
            consumers.add(cell[1])
        elif kind == "alt":
            consumers.add(NodeId("bottom", cell[1], cell[2]))
        consumers.discard(self.cur)
        for c in consumers:
            self.dirty(c)

    def add_edge(self, edge: Edge) -> None:
        state = self.state
        state.producers.setdefault(("edge", edge), set()).add(self.cur)
        if edge not in state.edges:
            state.edges.add(edge)
            self.local_changed = True
        # Even a pre-existing edge makes its callee reachable: after an
        # invalidation the edge may have survived while reachability did not.
        self.mark_reachable(edge[2])

    def add_flow(self, flow: tuple[str, str]) -> None:
        state = self.state
        state.producers.setdefault(("flow", flow), set()).add(self.cur)
        if flow not in state.flows:
            state.flows.add(flow)
            self.local_changed = True

    def mark_reachable(self, node: NodeId) -> None:
        if node not in self.state.reachable:
            self.state.reachable.add(node)
            self.dirty(node)

    def dirty(self, node: NodeId) -> None:
        if node == self.cur:
            self.local_changed = True
        elif node.container == self.cur_component:
            self.worklist.add(node)
        else:
            self.dirty_next.add(node)

    # -- driver ----------------------------------------------------------------

    def solve(self, seeds: Optional[Iterable[NodeId]] = None) -> int:
        program = self.program
        if seeds is None:
            self.state.reachable.add(program.entry_node)
            dirty = {program.entry_node}
        else:
            dirty = set(seeds)
        iterations = 0
        last_size = self.state.size()
        while dirty:
            iterations += 1
            if iterations > self.iter_cap:
                raise NonConvergenceError(
                    f"no fixed point after {self.iter_cap} rounds; raise "
                    f"{ITER_CAP_ENV} only if the program is truly that deep"
                )
            agenda = sorted(dirty)
            self.dirty_next = set()
            by_component: dict[str, list[NodeId]] = {}
            for node in agenda:
                by_component.setdefault(node.container, []).append(node)
            for component in program.component_order:
                if component not in by_component:
                    continue
                self.cur_component = component
                self.worklist = set(by_component[component])
                while self.worklist:
                    node = min(self.worklist)
                    self.worklist.remove(node)
                    if node not in self.state.reachable:
                        continue
                    self.transfer(node)
            self.cur_component = None
            dirty = self.dirty_next
            if self.debug:
                size = self.state.size()
                assert size >= last_size, "fact store shrank between rounds"
                last_size = size
        return iterations

    def transfer(self, node: NodeId) -> None:
        self.cur = node
        self.transferred.add(node)
        handler = self._transfer_asm if node in self.program.procs else self._transfer_host
        while True:
            self.local_changed = False
            handler(node)
            if not self.local_changed:
                break
        self.cur = None

    # -- host transfer -----------------------------------------------------------

    def _objs(self, node: NodeId, info, name: str) -> set:
        if name in info.free:
            return self.read(("bp", info.unit_name, name))
        return self.read(("vp", node, name))

    def _taints(self, node: NodeId, info, name: str) -> set:
        if name in info.free:
            return set()
        return self.read(("vt", node, name))

    def _transfer_host(self, node: NodeId) -> None:
        program = self.program
        info = program.host_info(node)
        for stmt in info.stmts:
            if isinstance(stmt, (Alloc, BridgeAlloc)):
                site = info.site(stmt)
                obj = AbstractObject(site, info.unit_name, stmt.type_name,
                                     isinstance(stmt, BridgeAlloc))
                self.write(("vp", node, stmt.target), {obj})
            elif isinstance(stmt, Return):
                self.write(("vp", node, RET_VAR), self._objs(node, info, stmt.var))
                self.write(("vt", node, RET_VAR), self._taints(node, info, stmt.var))
            elif isinstance(stmt, FieldLoad):
                objs: set = set()
                taints: set = set()
                for o in sorted(self._objs(node, info, stmt.receiver)):
                    objs |= self.read(("fp", o.site, stmt.field_name))
                    taints |= self.read(("ft", o.site, stmt.field_name))
                self.write(("vp", node, stmt.target), objs)
                self.write(("vt", node, stmt.target), taints)
            elif isinstance(stmt, FieldStore):
                value_objs = self._objs(node, info, stmt.value)
                value_taints = self._taints(node, info, stmt.value)
                for o in sorted(self._objs(node, info, stmt.receiver)):
                    self.write(("fp", o.site, stmt.field_name), value_objs)
                    self.write(("ft", o.site, stmt.field_name), value_taints)
            elif isinstance(stmt, BinOp):
                self.write(("vt", node, stmt.target),
                           self._taints(node, info, stmt.left)
                           | self._taints(node, info, stmt.right))
            elif isinstance(stmt, ConstAssign):
                pass
            elif isinstance(stmt, SourceAssign):
                self.write(("vt", node, stmt.target), {info.site(stmt)})
            elif isinstance(stmt, SinkCall):
                sink_site = info.site(stmt)
                for src in sorted(self._taints(node, info, stmt.var)):
                    self.add_flow((src, sink_site))
            elif isinstance(stmt, MethodCall):
                self._host_call(node, info, stmt)
            elif isinstance(stmt, Eval):
                site = info.site(stmt)
                binding = program.bindings.eval_sites[site]
                callee = program.node_for(binding.unit, binding.function)
                self.add_edge((node, site, callee, MECH_EVAL))
                for name in binding.exposed:
                    self.write(("bp", binding.unit, name), self._objs(node, info, name))
            elif isinstance(stmt, AsmCall):
                site = info.site(stmt)
                binding = program.bindings.asm_sites[site]
                callee = NodeId("bottom", binding.module, binding.proc)
                self.add_edge((node, site, callee, MECH_ASMCALL))
                for k, arg in enumerate(stmt.args):
                    self.write(("at", binding.module, f"arg{k}"),
                               self._taints(node, info, arg))
                self.write(("vt", node, stmt.target),
                           self.read(("at", binding.module, "ret0")))

    def _host_call(self, node: NodeId, info, stmt: MethodCall) -> None:
        program = self.program
        site = info.site(stmt)
        arg_objs = [self._objs(node, info, a) for a in stmt.args]
        arg_taints = [self._taints(node, info, a) for a in stmt.args]
        for o in sorted(self._objs(node, info, stmt.receiver)):
            decl = program.types[(o.unit, o.type_name)]
            target = decl.method_map().get(stmt.method)
            if target is None:
                continue  # the interpreter faults here; nothing flows
            mech = MECH_DIRECT if o.unit == info.unit_name else MECH_BRIDGE
            if self.disable_bridge_callbacks and mech == MECH_BRIDGE:
                continue
            callee = program.node_for(o.unit, target)
            self.add_edge((node, site, callee, mech))
            cparams = program.host_info(callee).decl.params
            if cparams:
                self.write(("vp", callee, cparams[0]), {o})
            for j in range(min(len(stmt.args), len(cparams) - 1)):
                self.write(("vp", callee, cparams[j + 1]), arg_objs[j])
                self.write(("vt", callee, cparams[j + 1]), arg_taints[j])
            self.write(("vp", node, stmt.target), self.read(("vp", callee, RET_VAR)))
            self.write(("vt", node, stmt.target), self.read(("vt", callee, RET_VAR)))

    # -- assembly transfer ---------------------------------------------------------

    def _transfer_asm(self, node: NodeId) -> None:
        info = self.program.proc_info(node)
        module = info.module_name
        local_set = set(info.decl.locals)

        def slot_taints(name: str) -> set:
            if name in local_set:
                return self.read(("alt", module, node.function, name))
            return self.read(("at", module, name))

        for idx, li in enumerate(info.decl.body):
            i = li.instr
            if isinstance(i, Load):
                self.write(("alt", module, node.function, i.dest), slot_taints(i.src))
            elif isinstance(i, Store):
                src = self.read(("alt", module, node.function, i.src))
                if i.dest in local_set:
                    self.write(("alt", module, node.function, i.dest), src)
                else:
                    self.write(("at", module, i.dest), src)
            elif isinstance(i, Op):
                self.write(("alt", module, node.function, i.dest),
                           self.read(("alt", module, node.function, i.left))
                           | self.read(("alt", module, node.function, i.right)))
            elif isinstance(i, Ret):
                self.write(("at", module, "ret0"),
                           self.read(("alt", module, node.function, i.src)))
            elif isinstance(i, Call):
                target_mod = i.module or module
                callee = NodeId("bottom", target_mod, i.proc)
                self.add_edge((node, info.site(idx), callee, MECH_ASM_DIRECT))
                if target_mod != module:
                    self.write(("at", module, "ret0"),
                               self.read(("at", target_mod, "ret0")))
            elif isinstance(i, Const):
                pass  # constants carry no taint and the lattice only joins


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class AnalysisResult:
    """Converged analysis: fact views, summaries, the resolved graph."""

    program: PolyglotProgram
    summaries: dict[NodeId, FunctionSummary]
    pts: dict[tuple[NodeId, str], frozenset[AbstractObject]]
    var_taint: dict[tuple[NodeId, str], frozenset[str]]
    field_pts: dict[tuple[str, str], frozenset[AbstractObject]]
    field_taint: dict[tuple[str, str], frozenset[str]]
    bridge_pts: dict[tuple[str, str], frozenset[AbstractObject]]
    asm_taint: dict[tuple[str, str], frozenset[str]]
    asm_local_taint: dict[tuple[str, str, str], frozenset[str]]
    taint_flows: frozenset[tuple[str, str]]
    iterations: int
    graph: CallGraph
    dep_edges: frozenset[tuple[NodeId, NodeId]]
    state: _State

    def facts_dict(self) -> dict:
        """Canonical facts; two results are equivalent iff these are equal.

        The iteration count and the dependency bookkeeping are engine internals
        and excluded on purpose.
        """
        return {
            "reachable": [n.key for n in sorted(self.state.reachable)],
            "pts": _nested(self.pts, lambda o: o.site),
            "var_taint": _nested(self.var_taint, str),
            "field_pts": [
                {"object": site, "field": f, "values": sorted(o.site for o in objs)}
                for (site, f), objs in sorted(self.field_pts.items())
            ],
            "field_taint": [
                {"object": site, "field": f, "sources": sorted(srcs)}
                for (site, f), srcs in sorted(self.field_taint.items())
            ],
            "bridge_pts": [
                {"unit": u, "name": n, "values": sorted(o.site for o in objs)}
                for (u, n), objs in sorted(self.bridge_pts.items())
            ],
            "asm_taint": [
                {"module": m, "cell": c, "sources": sorted(srcs)}
                for (m, c), srcs in sorted(self.asm_taint.items())
            ],
            "asm_local_taint": [
                {"module": m, "proc": p, "local": l, "sources": sorted(srcs)}
                for (m, p, l), srcs in sorted(self.asm_local_taint.items())
            ],
            "taint_flows": [
                {"source": a, "sink": b} for a, b in sorted(self.taint_flows)
            ],
            "call_graph": self.graph.to_json_dict(),
            "summaries": {
                n.key: s.to_json_dict() for n, s in sorted(self.summaries.items())
            },
        }

    def to_json_dict(self) -> dict:
        out = self.facts_dict()
        out["iterations"] = self.iterations
        return out


def _nested(mapping: dict, render) -> dict:
    out: dict[str, dict[str, list[str]]] = {}
    for (node, var), values in sorted(mapping.items()):
        out.setdefault(node.key, {})[var] = sorted(render(v) for v in values)
    return out


def _build_result(program: PolyglotProgram, state: _State, iterations: int) -> AnalysisResult:
    pts: dict = {}
    var_taint: dict = {}
    field_pts: dict = {}
    field_taint: dict = {}
    bridge_pts: dict = {}
    asm_taint: dict = {}
    asm_local_taint: dict = {}
    for cell, values in state.cells.items():
        if not values:
            continue
        kind = cell[0]
        if kind == "vp":
            pts[(cell[1], cell[2])] = frozenset(values)
        elif kind == "vt":
            var_taint[(cell[1], cell[2])] = frozenset(values)
        elif kind == "fp":
            field_pts[(cell[1], cell[2])] = frozenset(values)
        elif kind == "ft":
            field_taint[(cell[1], cell[2])] = frozenset(values)
        elif kind == "bp":
            bridge_pts[(cell[1], cell[2])] = frozenset(values)
        elif kind == "at":
            asm_taint[(cell[1], cell[2])] = frozenset(values)
        elif kind == "alt":
            asm_local_taint[(cell[1], cell[2], cell[3])] = frozenset(values)

    graph = CallGraph(nodes=set(state.reachable), edges=set(state.edges),
                      universe=program.universe(), entry=program.entry_node)
    site_targets: dict[str, tuple[NodeId, ...]] = {}
    by_site: dict[str, set[NodeId]] = {}
    for caller, site, callee, mech in state.edges:
        by_site.setdefault(site, set()).add(callee)
    for site, callees in by_site.items():
        site_targets[site] = tuple(sorted(callees))
    summaries = compute_summaries(program, sorted(state.reachable), site_targets)
    return AnalysisResult(
        program=program,
        summaries=summaries,
        pts=pts,
        var_taint=var_taint,
        field_pts=field_pts,
        field_taint=field_taint,
        bridge_pts=bridge_pts,
        asm_taint=asm_taint,
        asm_local_taint=asm_local_taint,
        taint_flows=frozenset(state.flows),
        iterations=iterations,
        graph=graph,
        dep_edges=frozenset(state.dep_edges),
        state=state,
    )


def mutual_fixpoint(program: PolyglotProgram, *, iter_cap: Optional[int] = None,
                    debug: bool = False,
                    disable_bridge_callbacks: bool = False) -> AnalysisResult:
    """Analyze a linked program to a global fixed point.

    `debug` turns on the monotonic-growth assertion between rounds.
    `disable_bridge_callbacks` is a fault-injection hook for the soundness
    harness: it makes the engine skip bridge callback resolution, which is
    exactly the class of bug the dynamic oracle is meant to catch.
    """
    engine = _Engine(program, iter_cap=iter_cap, debug=debug,
                     disable_bridge_callbacks=disable_bridge_callbacks)
    iterations = engine.solve()
    return _build_result(program, engine.state, iterations)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def _resolve_node(program: PolyglotProgram, function: Union[NodeId, str]) -> NodeId:
    if isinstance(function, NodeId):
        return function
    container, _, name = function.partition(".")
    return program.node_for(container, name)


def query_points_to(result: AnalysisResult, function: Union[NodeId, str],
                    variable: str) -> frozenset[AbstractObject]:
    """Fixed-point points-to set of `variable` in `function`.

    The variable must occur in the function (parameter, assignment target, or
    free bridge name); anything else raises UnknownVariableError.
    """
    from .hostlang import assigned_names

    node = _resolve_node(result.program, function)
    info = result.program.host_info(node)
    known = set(info.decl.params) | assigned_names(info.decl) | set(info.free)
    if variable not in known:
        raise UnknownVariableError(f"function {node.key} has no variable '{variable}'")
    if variable in info.free:
        return frozenset(result.bridge_pts.get((info.unit_name, variable), frozenset()))
    return frozenset(result.pts.get((node, variable), frozenset()))


def query_taint_flows(result: AnalysisResult) -> frozenset[tuple[str, str]]:
    """All (source site, sink site) pairs justified by the transfer closure."""
    return result.taint_flows
