"""Per-function summaries: symbolic effects, taint transfers, obligations.

A summary describes one function against named roots instead of concrete
facts: parameters, the return slot, free bridge names, its own allocation
sites, assembly cells, and taint sources. Boundary calls whose peer-language
facts are unknown stay behind as obligations; supplying richer external facts
resolves them and instantiates callee effects, and never removes anything
already in the summary.

Access paths are bounded at depth 2; a longer path widens, meaning the prefix
and anything reachable from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .asmlang import Call, Load, Op, Ret, Store
from .hostlang import (
    Alloc, AsmCall, BinOp, BridgeAlloc, ConstAssign, Eval, FieldLoad,
    FieldStore, MethodCall, Return, SinkCall, SourceAssign,
)
from .linker import NodeId, PolyglotProgram

PATH_DEPTH_BOUND = 2

RET_ROOT = "ret"


@dataclass(frozen=True, order=True)
class AccessPath:
    """A root plus a bounded field suffix; widened paths cover all extensions."""

    root: str
    fields: tuple[str, ...] = ()
    widened: bool = False

    def extend(self, field_name: str) -> "AccessPath":
        if self.widened:
            return self
        if len(self.fields) >= PATH_DEPTH_BOUND:
            return AccessPath(self.root, self.fields, widened=True)
        return AccessPath(self.root, self.fields + (field_name,))

    @property
    def text(self) -> str:
        out = self.root + "".join(f".{f}" for f in self.fields)
        return out + ".*" if self.widened else out

    def __str__(self) -> str:
        return self.text


def param_root(index: int) -> str:
    return f"param:{index}"


def bridge_root(name: str) -> str:
    return f"bridge:{name}"


def alloc_root(site: str) -> str:
    return f"alloc:{site}"


def asm_cell_root(module: str, cell: str) -> str:
    return f"asm:{module}:{cell}"


def source_root(site: str) -> str:
    return f"source:{site}"


def call_root(site: str) -> str:
    return f"call:{site}"


def sink_dest(site: str) -> str:
    return f"sink:{site}"


@dataclass(frozen=True)
class Obligation:
    """A boundary or unresolved call recorded in a summary.

    `resolved` lists callee keys once peer facts name the targets; a pending
    obligation has an empty tuple there.
    """

    site: str
    kind: str  # eval | asmcall | bridge-call | method-call
    callee: str
    args: tuple[str, ...] = ()
    resolved: tuple[str, ...] = ()


@dataclass(frozen=True)
class FunctionSummary:
    node: str  # NodeId key
    pts_effects: frozenset[tuple[AccessPath, AccessPath]] = frozenset()
    taint_transfer: frozenset[tuple[str, str]] = frozenset()
    obligations: tuple[Obligation, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "node": self.node,
            "pts_effects": [
                {"path": lhs.text, "value": rhs.text}
                for lhs, rhs in sorted(self.pts_effects)
            ],
            "taint_transfer": [
                {"from": a, "to": b} for a, b in sorted(self.taint_transfer)
            ],
            "obligations": [
                {
                    "site": o.site, "kind": o.kind, "callee": o.callee,
                    "args": list(o.args), "resolved": list(o.resolved),
                }
                for o in self.obligations
            ],
        }


@dataclass
class ExternalFacts:
    """What the rest of the program currently offers a summarization pass."""

    summaries: dict[NodeId, FunctionSummary] = field(default_factory=dict)
    site_targets: dict[str, tuple[NodeId, ...]] = field(default_factory=dict)


_PathSet = frozenset
_EMPTY: frozenset = frozenset()


def summarize_function(program: PolyglotProgram, node: NodeId,
                       external: Optional[ExternalFacts] = None) -> FunctionSummary:
    """Symbolic summary of one function or procedure under the given facts."""
    external = external or ExternalFacts()
    if node in program.procs:
        return _summarize_proc(program, node)
    return _summarize_host(program, node, external)


def _summarize_host(program: PolyglotProgram, node: NodeId,
                    external: ExternalFacts) -> FunctionSummary:
    info = program.host_info(node)
    params = info.decl.params
    sym: dict[str, frozenset[AccessPath]] = {
        p: frozenset({AccessPath(param_root(k))}) for k, p in enumerate(params)
    }
    tsym: dict[str, frozenset[str]] = {
        p: frozenset({param_root(k)}) for k, p in enumerate(params)
    }
    for name in info.free:
        sym[name] = frozenset({AccessPath(bridge_root(name))})
        tsym[name] = _EMPTY

    effects: set[tuple[AccessPath, AccessPath]] = set()
    transfers: set[tuple[str, str]] = set()
    obligations: dict[str, Obligation] = {}

    def paths(name: str) -> frozenset[AccessPath]:
        return sym.get(name, _EMPTY)

    def taints(name: str) -> frozenset[str]:
        return tsym.get(name, _EMPTY)

    def join_sym(name: str, add: frozenset[AccessPath]) -> bool:
        old = sym.get(name, _EMPTY)
        new = old | add
        sym[name] = new
        return new != old

    def join_tsym(name: str, add: frozenset[str]) -> bool:
        old = tsym.get(name, _EMPTY)
        new = old | add
        tsym[name] = new
        return new != old

    changed = True
    while changed:
        changed = False
        for stmt in info.stmts:
            site = info.site(stmt)
            if isinstance(stmt, (Alloc, BridgeAlloc)):
                changed |= join_sym(stmt.target, frozenset({AccessPath(alloc_root(site))}))
            elif isinstance(stmt, Return):
                for q in paths(stmt.var):
                    if (AccessPath(RET_ROOT), q) not in effects:
                        effects.add((AccessPath(RET_ROOT), q))
                        changed = True
                for t in taints(stmt.var):
                    if (t, RET_ROOT) not in transfers:
                        transfers.add((t, RET_ROOT))
                        changed = True
            elif isinstance(stmt, FieldLoad):
                loaded = frozenset(p.extend(stmt.field_name) for p in paths(stmt.receiver))
                changed |= join_sym(stmt.target, loaded)
                changed |= join_tsym(stmt.target, frozenset(p.text for p in loaded))
            elif isinstance(stmt, FieldStore):
                for p in paths(stmt.receiver):
                    lhs = p.extend(stmt.field_name)
                    for q in paths(stmt.value):
                        if (lhs, q) not in effects:
                            effects.add((lhs, q))
                            changed = True
                    for t in taints(stmt.value):
                        if (t, lhs.text) not in transfers:
                            transfers.add((t, lhs.text))
                            changed = True
            elif isinstance(stmt, BinOp):
                changed |= join_tsym(stmt.target, taints(stmt.left) | taints(stmt.right))
            elif isinstance(stmt, ConstAssign):
                pass
            elif isinstance(stmt, SourceAssign):
                changed |= join_tsym(stmt.target, frozenset({source_root(site)}))
            elif isinstance(stmt, SinkCall):
                for t in taints(stmt.var):
                    if (t, sink_dest(site)) not in transfers:
                        transfers.add((t, sink_dest(site)))
                        changed = True
            elif isinstance(stmt, Eval):
                binding = program.bindings.eval_sites[site]
                target = program.node_for(binding.unit, binding.function)
                obligations[site] = Obligation(
                    site, "eval", f"{binding.unit}.{binding.function}",
                    args=binding.exposed, resolved=(target.key,),
                )
            elif isinstance(stmt, AsmCall):
                binding = program.bindings.asm_sites[site]
                target = NodeId("bottom", binding.module, binding.proc)
                obligations[site] = Obligation(
                    site, "asmcall", f"{binding.module}.{binding.proc}",
                    args=stmt.args, resolved=(target.key,),
                )
                for k, arg in enumerate(stmt.args):
                    dest = asm_cell_root(binding.module, f"arg{k}")
                    for t in taints(arg):
                        if (t, dest) not in transfers:
                            transfers.add((t, dest))
                            changed = True
                changed |= join_tsym(
                    stmt.target,
                    frozenset({asm_cell_root(binding.module, "ret0")}),
                )
            elif isinstance(stmt, MethodCall):
                changed |= _summarize_call(program, info, stmt, site, external,
                                           sym, tsym, effects, transfers,
                                           obligations, join_sym, join_tsym)
    return FunctionSummary(node.key, frozenset(effects), frozenset(transfers),
                           tuple(obligations[s] for s in sorted(obligations)))


def _summarize_call(program, info, stmt: MethodCall, site: str,
                    external: ExternalFacts, sym, tsym, effects, transfers,
                    obligations, join_sym, join_tsym) -> bool:
    changed = False
    receiver_paths = sym.get(stmt.receiver, _EMPTY)
    is_bridge = stmt.receiver in info.free
    targets = external.site_targets.get(site, ())
    if is_bridge or not targets:
        kind = "bridge-call" if is_bridge else "method-call"
        existing = obligations.get(site)
        resolved = tuple(sorted(t.key for t in targets))
        ob = Obligation(site, kind, f"{stmt.receiver}.{stmt.method}",
                        args=(stmt.receiver,) + stmt.args, resolved=resolved)
        if existing != ob:
            obligations[site] = ob

    # The call result stands for itself until callee effects substitute it.
    changed |= join_sym(stmt.target, frozenset({AccessPath(call_root(site))}))
    changed |= join_tsym(stmt.target, frozenset({call_root(site)}))

    arg_paths = [receiver_paths] + [sym.get(a, _EMPTY) for a in stmt.args]
    arg_taints = [tsym.get(stmt.receiver, _EMPTY)] + [tsym.get(a, _EMPTY) for a in stmt.args]

    for target in targets:
        summary = external.summaries.get(target)
        if summary is None:
            continue
        subst = _Subst(info.unit_name, target, arg_paths, arg_taints)
        for lhs, rhs in summary.pts_effects:
            rhs_paths = subst.paths(rhs)
            if lhs.root == RET_ROOT and not lhs.fields:
                changed |= join_sym(stmt.target, rhs_paths)
                continue
            for new_lhs in subst.paths(lhs):
                for new_rhs in rhs_paths:
                    if (new_lhs, new_rhs) not in effects:
                        effects.add((new_lhs, new_rhs))
                        changed = True
        for src, dst in summary.taint_transfer:
            new_srcs = subst.taint(src)
            if dst == RET_ROOT:
                changed |= join_tsym(stmt.target, new_srcs)
                continue
            for new_dst in subst.taint_dest(dst):
                for new_src in new_srcs:
                    if (new_src, new_dst) not in transfers:
                        transfers.add((new_src, new_dst))
                        changed = True
    return changed


class _Subst:
    """Substitutes callee param roots with caller symbolic values.

    Callee bridge roots survive only for same-unit callees (the exposure
    environment is inherited on direct calls and empty on callbacks); other
    roots (allocations, assembly cells, sources, call placeholders) are
    globally meaningful and pass through.
    """

    def __init__(self, caller_unit: str, callee: NodeId,
                 arg_paths: list[frozenset[AccessPath]],
                 arg_taints: list[frozenset[str]]):
        self.same_unit = callee.container == caller_unit
        self.arg_paths = arg_paths
        self.arg_taints = arg_taints

    def _param_index(self, root: str) -> Optional[int]:
        if root.startswith("param:"):
            return int(root.split(":", 1)[1])
        return None

    def paths(self, path: AccessPath) -> frozenset[AccessPath]:
        k = self._param_index(path.root)
        if k is None:
            if path.root.startswith("bridge:") and not self.same_unit:
                return _EMPTY
            return frozenset({path})
        if k >= len(self.arg_paths):
            return _EMPTY
        out = set()
        for base in self.arg_paths[k]:
            p = base
            for f in path.fields:
                p = p.extend(f)
            if path.widened:
                p = AccessPath(p.root, p.fields, widened=True)
            out.add(p)
        return frozenset(out)

    def taint(self, root: str) -> frozenset[str]:
        parts = root.split(".")
        base = parts[0]
        widened = len(parts) > 1 and parts[-1] == "*"
        suffix = [f for f in parts[1:] if f != "*"]
        k = self._param_index(base)
        if k is None:
            if base.startswith("bridge:") and not self.same_unit:
                return _EMPTY
            return frozenset({root})
        if k >= len(self.arg_taints):
            return _EMPTY
        if not suffix and not widened:
            return self.arg_taints[k]
        # A field cell under a parameter: rebase onto the argument's paths.
        out = set()
        for base_path in self.arg_paths[k]:
            p = base_path
            for f in suffix:
                p = p.extend(f)
            if widened:
                p = AccessPath(p.root, p.fields, widened=True)
            out.add(p.text)
        return frozenset(out)

    def taint_dest(self, dest: str) -> frozenset[str]:
        if dest.startswith("sink:") or dest.startswith("asm:"):
            return frozenset({dest})
        return self.taint(dest)


def _summarize_proc(program: PolyglotProgram, node: NodeId) -> FunctionSummary:
    info = program.proc_info(node)
    module = info.module_name
    local_set = set(info.decl.locals)
    tsym: dict[str, frozenset[str]] = {}
    transfers: set[tuple[str, str]] = set()
    obligations: dict[str, Obligation] = {}

    def cell(name: str) -> str:
        return asm_cell_root(module, name)

    def local_taints(name: str) -> frozenset[str]:
        return tsym.get(name, _EMPTY)

    changed = True
    while changed:
        changed = False
        for idx, li in enumerate(info.decl.body):
            i = li.instr
            if isinstance(i, Load):
                add = local_taints(i.src) if i.src in local_set else frozenset({cell(i.src)})
                old = tsym.get(i.dest, _EMPTY)
                tsym[i.dest] = old | add
                changed |= tsym[i.dest] != old
            elif isinstance(i, Store):
                if i.dest in local_set:
                    old = tsym.get(i.dest, _EMPTY)
                    tsym[i.dest] = old | local_taints(i.src)
                    changed |= tsym[i.dest] != old
                else:
                    for t in local_taints(i.src):
                        if (t, cell(i.dest)) not in transfers:
                            transfers.add((t, cell(i.dest)))
                            changed = True
            elif isinstance(i, Op):
                old = tsym.get(i.dest, _EMPTY)
                tsym[i.dest] = old | local_taints(i.left) | local_taints(i.right)
                changed |= tsym[i.dest] != old
            elif isinstance(i, Ret):
                for t in local_taints(i.src):
                    if (t, cell("ret0")) not in transfers:
                        transfers.add((t, cell("ret0")))
                        changed = True
            elif isinstance(i, Call):
                target_mod = i.module or module
                site = info.site(idx)
                target = NodeId("bottom", target_mod, i.proc)
                if site not in obligations:
                    obligations[site] = Obligation(site, "asmcall",
                                                   f"{target_mod}.{i.proc}",
                                                   resolved=(target.key,))
                if target_mod != module:
                    pair = (asm_cell_root(target_mod, "ret0"), cell("ret0"))
                    if pair not in transfers:
                        transfers.add(pair)
                        changed = True
    return FunctionSummary(node.key, frozenset(), frozenset(transfers),
                           tuple(obligations[s] for s in sorted(obligations)))


def compute_summaries(program: PolyglotProgram, nodes: list[NodeId],
                      site_targets: dict[str, tuple[NodeId, ...]]) -> dict[NodeId, FunctionSummary]:
    """Summaries for the given functions, iterated to a mutual fixed point."""
    summaries: dict[NodeId, FunctionSummary] = {}
    ordered = sorted(nodes)
    changed = True
    while changed:
        changed = False
        external = ExternalFacts(summaries=dict(summaries), site_targets=site_targets)
        for node in ordered:
            new = summarize_function(program, node, external)
            if summaries.get(node) != new:
                summaries[node] = new
                changed = True
    return summaries
