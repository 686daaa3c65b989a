"""Differential re-analysis after a whole-function-body edit.

Rather than differential transfer functions, this is invalidate-then-recompute
over the dependency closure of the edited function: every fact derived only by
affected functions is forgotten, the surviving facts keep their unaffected
justifications, and the engine resumes from the affected set. The contract is
equivalence: the resulting facts must match a from-scratch analysis of the
edited program exactly, including facts that exist only because of the old
body disappearing.

Edits replace one function or procedure body and keep the signature. Changes
to type declarations or to the manifest need a full re-link and a fresh
analysis; the CLI says so.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from . import asmlang, hostlang
from .dataflow import AnalysisResult, _Engine, _build_result
from .diagnostics import Diagnostics, LinkError
from .hostlang import FunctionDecl, HostUnit
from .linker import NodeId, PolyglotProgram, link_units


class EditError(Exception):
    """The replacement body fails its language's checker or breaks the link."""

    def __init__(self, diagnostics: Diagnostics):
        super().__init__(str(diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Edit:
    """Replace the body of `target` with `body_text` (same signature).

    Host bodies are braced statement blocks; assembly bodies are braced
    `local` declarations followed by instructions.
    """

    target: NodeId
    body_text: str


@dataclass(frozen=True)
class IncrementalReport:
    resummarized: frozenset[NodeId]
    rounds: int
    result: AnalysisResult

    def ratio(self) -> float:
        """Share of reachable functions that had to be re-summarized."""
        total = max(len(self.result.state.reachable), 1)
        return len(self.resummarized) / total


@dataclass(frozen=True)
class DependencyGraph:
    """Consumer -> producer edges recorded during the last fixed point."""

    edges: frozenset[tuple[NodeId, NodeId]]

    def consumers_of(self, node: NodeId) -> set[NodeId]:
        """Everything whose facts transitively depend on `node`."""
        reverse: dict[NodeId, set[NodeId]] = {}
        for consumer, producer in self.edges:
            reverse.setdefault(producer, set()).add(consumer)
        seen: set[NodeId] = set()
        frontier = [node]
        while frontier:
            cur = frontier.pop()
            for consumer in reverse.get(cur, ()):
                if consumer not in seen:
                    seen.add(consumer)
                    frontier.append(consumer)
        return seen


def build_dependency_graph(result: AnalysisResult) -> DependencyGraph:
    """The cross-function dependency relation behind a converged result."""
    return DependencyGraph(result.dep_edges)


# ---------------------------------------------------------------------------
# Edit application
# ---------------------------------------------------------------------------

def parse_edit_spec(text: str) -> tuple[str, str, str]:
    """Split an edit file into (relative path, function name, body text).

    Format: a `file:` line, a `function:` line, a `---` separator, then the
    replacement body in the owning language's concrete syntax.
    """
    lines = text.splitlines()
    header: dict[str, str] = {}
    body_start = None
    for idx, line in enumerate(lines):
        stripped = line.strip()
        if stripped == "---":
            body_start = idx + 1
            break
        if ":" in stripped:
            key, _, value = stripped.partition(":")
            header[key.strip()] = value.strip()
    if body_start is None or "file" not in header or "function" not in header:
        diags = Diagnostics()
        diags.add("edit file needs 'file:', 'function:' and a '---' separator")
        raise EditError(diags)
    return header["file"], header["function"], "\n".join(lines[body_start:])


def edit_from_spec(program: PolyglotProgram, rel_path: str, function: str,
                   body_text: str) -> Edit:
    container = Path(rel_path).stem
    if container not in program.provenance:
        diags = Diagnostics()
        diags.add(f"edit names unknown unit or module '{container}'")
        raise EditError(diags)
    return Edit(program.node_for(container, function), body_text)


def apply_edit(program: PolyglotProgram, edit: Edit) -> PolyglotProgram:
    """Splice the replacement body in and re-link in memory."""
    target = edit.target
    if target in program.functions:
        body = _parse_host_body(edit)
        old = program.host_info(target).decl
        new_decl = replace(old, body=body)
        new_units = {
            name: _swap_function(unit, new_decl) if name == target.container else unit
            for name, unit in program.host_units.items()
        }
        entry = new_units[program.entry.name]
        middles = tuple(new_units[u.name] for u in program.middles)
        asms = program.asms
    elif target in program.procs:
        locals_, body = _parse_asm_body(edit)
        old_proc = program.proc_info(target).decl
        new_proc = replace(old_proc, locals=locals_, body=body)
        entry = program.entry
        middles = program.middles
        asms = tuple(
            _swap_proc(m, new_proc) if m.name == target.container else m
            for m in program.asms
        )
    else:
        diags = Diagnostics()
        diags.add(f"edit targets unknown function {target.key}")
        raise EditError(diags)
    try:
        return link_units(entry, middles, asms, program.entry_function)
    except LinkError as exc:
        raise EditError(exc.diagnostics) from None


def _parse_host_body(edit: Edit):
    try:
        return hostlang.parse_block(edit.body_text, source=f"<edit {edit.target.key}>")
    except Exception as exc:
        diags = Diagnostics()
        diags.add(f"replacement body does not parse: {exc}")
        raise EditError(diags) from None


def _parse_asm_body(edit: Edit):
    try:
        return asmlang.parse_proc_body(edit.body_text, source=f"<edit {edit.target.key}>")
    except Exception as exc:
        diags = Diagnostics()
        diags.add(f"replacement body does not parse: {exc}")
        raise EditError(diags) from None


def _swap_function(unit: HostUnit, decl: FunctionDecl) -> HostUnit:
    functions = tuple(decl if f.name == decl.name else f for f in unit.functions)
    return replace(unit, functions=functions)


def _swap_proc(module: asmlang.AsmModule, proc: asmlang.Procedure) -> asmlang.AsmModule:
    procedures = tuple(proc if p.name == proc.name else p for p in module.procedures)
    return replace(module, procedures=procedures)


# ---------------------------------------------------------------------------
# Re-analysis
# ---------------------------------------------------------------------------

def reanalyze(program: PolyglotProgram, previous: AnalysisResult,
              edit: Edit, *, iter_cap=None, debug: bool = False) -> IncrementalReport:
    """Re-analyze after `edit`, recomputing only the affected closure.

    `previous` must be a converged result for `program`. The report's result
    is structurally equal to `mutual_fixpoint(apply_edit(program, edit))`.
    """
    edited = apply_edit(program, edit)
    target = edit.target

    deps = DependencyGraph(previous.dep_edges)
    affected = deps.consumers_of(target) | {target}

    state = previous.state.clone()
    for readers in state.readers.values():
        readers.discard(target)  # the new body registers its own reads
    had_facts = set(state.reachable)
    invalidated = set(affected)
    state.invalidate(affected)
    # Losing facts can orphan whole regions of the old call graph. A function
    # that falls out of reach must forget its facts, and so must everything
    # that consumed them (a still-reachable consumer now holds derivations
    # with no justification); each wave can orphan more.
    while True:
        reachable = _reachable_from(edited.entry_node, state.edges)
        dead = (had_facts - reachable) - invalidated
        if not dead:
            break
        wave = set(dead)
        for node in dead:
            wave |= deps.consumers_of(node)
        wave -= invalidated
        state.invalidate(wave)
        invalidated |= wave
    state.reachable = reachable

    engine = _Engine(edited, iter_cap=iter_cap, debug=debug, state=state)
    rounds = engine.solve(seeds=sorted(invalidated))
    result = _build_result(edited, state, rounds)
    resummarized = frozenset(engine.transferred | {target})
    return IncrementalReport(resummarized, rounds, result)


def _reachable_from(entry: NodeId, edges) -> set[NodeId]:
    adjacency: dict[NodeId, set[NodeId]] = {}
    for caller, _site, callee, _mech in edges:
        adjacency.setdefault(caller, set()).add(callee)
    seen = {entry}
    frontier = [entry]
    while frontier:
        cur = frontier.pop()
        for nxt in adjacency.get(cur, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen
