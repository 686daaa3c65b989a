"""Assemble parsed units and modules into a linked three-language program.

The linked program has one entry unit (runs first, never a guest), any number
of middle units (guests of the entry or of each other, hosts of the assembly
layer), and assembly modules at the bottom (never calling upward). Linking
resolves every boundary statement to a binding:

* `eval(u.f, [i...])` sites bind to a guest function plus the bridge names it
  exposes for that activation,
* `v = asmcall(mod.p, args...)` sites bind to an exported procedure and an
  argument count.

Statement positions are the stable coordinate system of everything downstream:
a site id is `container:function:index` with indexes assigned by a pre-order
walk, and allocation sites reuse the same ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from . import asmlang, hostlang
from .asmlang import AsmModule, Procedure, arg_usage, check_asm, parse_asm
from .diagnostics import Diagnostics, LinkError
from .hostlang import (
    Alloc, AsmCall, BridgeAlloc, Eval, FunctionDecl, HostUnit, Stmt,
    check_host, free_names, iter_statements, parse_host,
)

PROV_ENTRY = "entry"
PROV_MIDDLE = "middle"
PROV_BOTTOM = "bottom"

MECH_DIRECT = "direct-virtual"
MECH_EVAL = "eval"
MECH_BRIDGE = "bridge-callback"
MECH_ASMCALL = "asmcall"
MECH_ASM_DIRECT = "asm-direct"

MECHANISMS = (MECH_DIRECT, MECH_EVAL, MECH_BRIDGE, MECH_ASMCALL, MECH_ASM_DIRECT)


class UnknownSiteError(KeyError):
    """Raised by lookup_binding for a site id with no binding."""


@dataclass(frozen=True, order=True)
class NodeId:
    """A function or procedure, tagged with the provenance of its container."""

    provenance: str  # entry | middle | bottom
    container: str
    function: str

    @property
    def key(self) -> str:
        return f"{self.provenance}/{self.container}.{self.function}"

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class EvalBinding:
    site: str
    unit: str
    function: str
    exposed: tuple[str, ...]


@dataclass(frozen=True)
class AsmBinding:
    site: str
    module: str
    proc: str
    arity: int


@dataclass
class BindingTable:
    """Resolved boundary sites plus the bridge method dispatch table."""

    eval_sites: dict[str, EvalBinding] = field(default_factory=dict)
    asm_sites: dict[str, AsmBinding] = field(default_factory=dict)
    # (unit, type, method) -> host function node, for bridge-capable types.
    bridge_methods: dict[tuple[str, str, str], NodeId] = field(default_factory=dict)


@dataclass(frozen=True)
class Manifest:
    """File-level description of a program; paths relative to base_dir."""

    entry: str
    middle: tuple[str, ...]
    asm: tuple[str, ...]
    entry_function: str
    base_dir: Path = Path(".")


def load_manifest(path: Union[str, Path]) -> Manifest:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    try:
        return Manifest(
            entry=data["entry"],
            middle=tuple(data.get("middle", [])),
            asm=tuple(data.get("asm", [])),
            entry_function=data["entry_function"],
            base_dir=path.parent,
        )
    except KeyError as exc:
        diags = Diagnostics()
        diags.add(f"manifest {path} is missing key {exc.args[0]!r}")
        raise LinkError(diags) from None


@dataclass
class HostFunctionInfo:
    """Per-function indexes shared by the interpreter and the analyses."""

    node: NodeId
    unit_name: str
    decl: FunctionDecl
    stmts: list[Stmt]                    # pre-order, index == position
    free: frozenset[str]

    def __post_init__(self) -> None:
        self._index = {id(s): i for i, s in enumerate(self.stmts)}

    def site(self, stmt: Stmt) -> str:
        return f"{self.unit_name}:{self.decl.name}:{self._index[id(stmt)]}"

    def site_at(self, index: int) -> str:
        return f"{self.unit_name}:{self.decl.name}:{index}"


@dataclass
class AsmProcInfo:
    node: NodeId
    module_name: str
    decl: Procedure
    labels: dict[str, int]

    def site(self, index: int) -> str:
        return f"{self.module_name}:{self.decl.name}:{index}"


@dataclass
class PolyglotProgram:
    """A linked program plus the lookup tables everything downstream shares."""

    entry: HostUnit
    middles: tuple[HostUnit, ...]
    asms: tuple[AsmModule, ...]
    entry_function: str
    bindings: BindingTable

    host_units: dict[str, HostUnit] = field(default_factory=dict)
    asm_modules: dict[str, AsmModule] = field(default_factory=dict)
    functions: dict[NodeId, HostFunctionInfo] = field(default_factory=dict)
    procs: dict[NodeId, AsmProcInfo] = field(default_factory=dict)
    types: dict[tuple[str, str], hostlang.TypeDecl] = field(default_factory=dict)
    bridge_capable: frozenset[tuple[str, str]] = frozenset()
    provenance: dict[str, str] = field(default_factory=dict)
    component_order: tuple[str, ...] = ()

    # -- lookup helpers ------------------------------------------------------

    @property
    def entry_node(self) -> NodeId:
        return NodeId(PROV_ENTRY, self.entry.name, self.entry_function)

    def node_for(self, container: str, function: str) -> NodeId:
        return NodeId(self.provenance[container], container, function)

    def host_info(self, node: NodeId) -> HostFunctionInfo:
        return self.functions[node]

    def proc_info(self, node: NodeId) -> AsmProcInfo:
        return self.procs[node]

    def is_host(self, node: NodeId) -> bool:
        return node in self.functions

    def universe(self) -> tuple[NodeId, ...]:
        """Every declared function and procedure, sorted."""
        return tuple(sorted(list(self.functions) + list(self.procs)))

    def function_of_site(self, site: str) -> NodeId:
        container, function, _ = site.rsplit(":", 2)
        return self.node_for(container, function)


def lookup_binding(program: PolyglotProgram, site: str) -> Union[EvalBinding, AsmBinding]:
    """The unique binding for a boundary site id."""
    binding = program.bindings.eval_sites.get(site) or program.bindings.asm_sites.get(site)
    if binding is None:
        raise UnknownSiteError(site)
    return binding


# ---------------------------------------------------------------------------
# Linking
# ---------------------------------------------------------------------------

def link(manifest: Manifest) -> PolyglotProgram:
    """Parse, check, and bind everything the manifest names.

    Raises LinkError carrying all collected diagnostics; parse failures in any
    file abort immediately with that file's position information.
    """
    diags = Diagnostics()

    def read(rel: str) -> str:
        p = manifest.base_dir / rel
        try:
            return p.read_text(encoding="utf-8")
        except OSError as exc:
            diags.add(f"cannot read {p}: {exc}")
            raise LinkError(diags) from None

    def stem_check(rel: str, declared: str) -> None:
        stem = Path(rel).stem
        if stem != declared:
            diags.add(f"file '{rel}' declares name '{declared}', expected '{stem}'")

    entry = parse_host(read(manifest.entry), source=manifest.entry)
    stem_check(manifest.entry, entry.name)
    middles = []
    for rel in manifest.middle:
        u = parse_host(read(rel), source=rel)
        stem_check(rel, u.name)
        middles.append(u)
    asms = []
    for rel in manifest.asm:
        m = parse_asm(read(rel), source=rel)
        stem_check(rel, m.name)
        asms.append(m)
    if diags:
        raise LinkError(diags)
    return link_units(entry, middles, asms, manifest.entry_function)


def link_units(entry: HostUnit, middles: Iterable[HostUnit],
               asms: Iterable[AsmModule], entry_function: str) -> PolyglotProgram:
    """Link already-parsed units; the in-memory core of `link`."""
    middles = tuple(middles)
    asms = tuple(asms)
    diags = Diagnostics()

    for unit in (entry, *middles):
        diags.extend(check_host(unit))
    for module in asms:
        diags.extend(check_asm(module))
    if diags:
        raise LinkError(diags)

    names: dict[str, str] = {}
    for unit in (entry, *middles):
        if unit.name in names:
            diags.add(f"duplicate unit/module name '{unit.name}'")
        names[unit.name] = "host"
    for module in asms:
        if module.name in names:
            diags.add(f"duplicate unit/module name '{module.name}'")
        names[module.name] = "asm"

    program = PolyglotProgram(entry, middles, asms, entry_function, BindingTable())
    program.host_units = {u.name: u for u in (entry, *middles)}
    program.asm_modules = {m.name: m for m in asms}
    program.provenance = {entry.name: PROV_ENTRY}
    program.provenance.update({u.name: PROV_MIDDLE for u in middles})
    program.provenance.update({m.name: PROV_BOTTOM for m in asms})
    program.component_order = (entry.name, *(u.name for u in middles),
                               *(m.name for m in asms))

    bridge_types: set[tuple[str, str]] = set()
    for unit in (entry, *middles):
        for t in unit.types:
            program.types[(unit.name, t.name)] = t
        for fn in unit.functions:
            node = NodeId(program.provenance[unit.name], unit.name, fn.name)
            info = HostFunctionInfo(node, unit.name, fn,
                                    list(iter_statements(fn.body)), frozenset(free_names(fn)))
            program.functions[node] = info
            for s in info.stmts:
                if isinstance(s, BridgeAlloc):
                    bridge_types.add((unit.name, s.type_name))
    for module in asms:
        for p in module.procedures:
            node = NodeId(PROV_BOTTOM, module.name, p.name)
            labels = {li.label: i for i, li in enumerate(p.body) if li.label}
            program.procs[node] = AsmProcInfo(node, module.name, p, labels)

    entry_fn = program.host_units[entry.name].function_map().get(entry_function)
    if entry_fn is None:
        diags.add(f"entry function '{entry.name}.{entry_function}' does not exist")
    elif entry_fn.params:
        diags.add(f"entry function '{entry.name}.{entry_function}' must take no parameters")

    middle_names = {u.name for u in middles}
    exposures: dict[str, set[str]] = {name: set() for name in middle_names}
    targeted: set[str] = set()

    for info in program.functions.values():
        _bind_function(program, info, middle_names, exposures, targeted, diags)

    # Free names in the entry unit can never be bound: the entry is not a guest.
    for info in program.functions.values():
        if info.node.provenance == PROV_ENTRY and info.free:
            for name in sorted(info.free):
                diags.add(
                    f"'{info.unit_name}.{info.decl.name}' reads '{name}', which is "
                    "neither assigned nor a parameter, and the entry unit never "
                    "receives bridge exposures"
                )

    # Conservative exposure justification for guest units that are eval targets.
    for unit_name in sorted(targeted):
        exposed = exposures[unit_name]
        unit_free: set[str] = set()
        for fn in program.host_units[unit_name].functions:
            unit_free |= free_names(fn)
        for name in sorted(unit_free - exposed):
            diags.add(
                f"bridge name '{name}' is read in unit '{unit_name}' but exposed "
                "by no eval site targeting it"
            )

    # Assembly-internal cross-module calls: target must exist and be exported.
    for module in asms:
        for p in module.procedures:
            for li in p.body:
                i = li.instr
                if isinstance(i, asmlang.Call) and i.module and i.module != module.name:
                    target_mod = program.asm_modules.get(i.module)
                    if target_mod is None:
                        diags.add(f"call to unknown module '{i.module}' from "
                                  f"'{module.name}.{p.name}'", *li.loc)
                        continue
                    target = target_mod.proc_map().get(i.proc)
                    if target is None:
                        diags.add(f"call to unknown procedure '{i.module}.{i.proc}' "
                                  f"from '{module.name}.{p.name}'", *li.loc)
                    elif not target.exported:
                        diags.add(f"target not exported: '{i.module}.{i.proc}' called "
                                  f"from '{module.name}.{p.name}'", *li.loc)

    for (unit_name, type_name) in sorted(bridge_types):
        t = program.types[(unit_name, type_name)]
        for method, target in t.methods:
            node = program.node_for(unit_name, target)
            program.bindings.bridge_methods[(unit_name, type_name, method)] = node
    program.bridge_capable = frozenset(bridge_types)

    if diags:
        raise LinkError(diags)
    return program


def _bind_function(program: PolyglotProgram, info: HostFunctionInfo,
                   middle_names: set[str], exposures: dict[str, set[str]],
                   targeted: set[str], diags: Diagnostics) -> None:
    unit_name = info.unit_name
    fn = info.decl
    definite_objects = _definitely_object_vars(fn)
    for stmt in info.stmts:
        if isinstance(stmt, Eval):
            site = info.site(stmt)
            if stmt.unit == unit_name:
                diags.add(f"unit '{unit_name}' cannot eval itself", *stmt.loc)
                continue
            if stmt.unit not in middle_names:
                if stmt.unit == program.entry.name:
                    diags.add(f"the entry unit cannot be an eval target", *stmt.loc)
                elif stmt.unit in program.asm_modules:
                    diags.add(f"eval target '{stmt.unit}' is an assembly module; "
                              "use asmcall", *stmt.loc)
                else:
                    diags.add(f"unresolved guest function {stmt.unit}.{stmt.function}",
                              *stmt.loc)
                continue
            guest = program.host_units[stmt.unit].function_map().get(stmt.function)
            if guest is None:
                diags.add(f"unresolved guest function {stmt.unit}.{stmt.function}",
                          *stmt.loc)
                continue
            if guest.params:
                diags.add(
                    f"eval target '{stmt.unit}.{stmt.function}' must take no "
                    "parameters; guests receive data through exposed bridges",
                    *stmt.loc,
                )
                continue
            program.bindings.eval_sites[site] = EvalBinding(site, stmt.unit,
                                                            stmt.function, stmt.exposed)
            exposures[stmt.unit].update(stmt.exposed)
            targeted.add(stmt.unit)
        elif isinstance(stmt, AsmCall):
            site = info.site(stmt)
            module = program.asm_modules.get(stmt.module)
            if module is None:
                diags.add(f"unknown assembly module '{stmt.module}'", *stmt.loc)
                continue
            proc = module.proc_map().get(stmt.proc)
            if proc is None:
                diags.add(f"unknown procedure '{stmt.module}.{stmt.proc}'", *stmt.loc)
                continue
            if not proc.exported:
                diags.add(f"target not exported: '{stmt.module}.{stmt.proc}'", *stmt.loc)
                continue
            needed = arg_usage(module, stmt.proc) + 1
            if len(stmt.args) < needed:
                diags.add(
                    f"arity mismatch: '{stmt.module}.{stmt.proc}' reads arg0..arg{needed - 1} "
                    f"but the site passes {len(stmt.args)} argument(s)", *stmt.loc,
                )
                continue
            for arg in stmt.args:
                if arg in definite_objects:
                    diags.add(f"object argument at an asmcall site: '{arg}' always "
                              "holds an object reference", *stmt.loc)
            program.bindings.asm_sites[site] = AsmBinding(site, stmt.module, stmt.proc,
                                                          len(stmt.args))


def _definitely_object_vars(fn: FunctionDecl) -> set[str]:
    """Variables whose every assignment in `fn` is an allocation."""
    alloc_targets: set[str] = set()
    other_targets: set[str] = set()
    for s in iter_statements(fn.body):
        t = hostlang.stmt_target(s)
        if t is None:
            continue
        if isinstance(s, (Alloc, BridgeAlloc)):
            alloc_targets.add(t)
        else:
            other_targets.add(t)
    return alloc_targets - other_targets
