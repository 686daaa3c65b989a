"""Seeded random program generator for the analysis corpus.

Programs are generated well-formed by construction: every loop is counter
bounded, the call structure is layered so nothing recurses, guest units only
read bridge names that the eval sites targeting them expose, and assembly
arguments are always integers. A generated program therefore checks, links,
and runs to completion, which keeps the dynamic oracle about analysis quality
rather than about crashes.

Shape in brief: the entry unit's `main` and each middle unit's `start`
function carry the interesting control (allocations, virtual calls, eval
chains into strictly deeper middles, asmcalls, taint sources and sinks).
Method-table functions are leaves, so bridge callbacks terminate. Extra
worker functions are deliberately unreachable decoys. All generated types
share one field and method vocabulary (`f0..fN`, `link`, `m0..mM`, with a
fixed arity per method name), so a guest can use whatever bridge object it is
handed. Integer fields only ever hold integers and `link` only ever holds
objects, which rules the arithmetic-on-object fault class out by shape.

Identical GenConfig yields byte-identical rendered sources.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path
from typing import Optional, Union

from .asmlang import arg_usage, parse_asm
from .hostlang import parse_host
from .incremental import Edit, apply_edit
from .linker import LinkError, NodeId, PolyglotProgram, link_units


@dataclass(frozen=True)
class GenConfig:
    """Knobs for one generated program; `seed` fixes every choice."""

    seed: int = 0
    types_per_unit: int = 2
    functions_per_unit: int = 2        # unreachable worker decoys per unit
    middle_units: int = 2
    asm_modules: int = 1
    statements_per_function: int = 6
    eval_density: float = 0.6
    asmcall_density: float = 0.5
    callback_density: float = 0.6
    max_trip: int = 3
    fields_per_type: int = 2
    methods_per_type: int = 2
    max_attempts: int = 4

    def __post_init__(self) -> None:
        for name in ("types_per_unit", "statements_per_function", "max_trip",
                     "fields_per_type", "methods_per_type", "max_attempts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("functions_per_unit", "middle_units", "asm_modules"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("eval_density", "asmcall_density", "callback_density"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be within [0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        known = {f.name for f in dc_fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown GenConfig keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json_file(cls, path: Union[str, Path]) -> "GenConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ProgramSources:
    """Rendered sources plus the manifest that ties them together."""

    files: dict[str, str]       # filename -> text
    manifest: dict              # entry/middle/asm/entry_function
    entry_function: str = "main"

    def write(self, outdir: Union[str, Path]) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.files.items()):
            (outdir / name).write_text(text, encoding="utf-8")
        manifest_path = outdir / "manifest.json"
        manifest_path.write_text(
            json.dumps(self.manifest, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return manifest_path


_INT_FIELD_COUNT_MIN = 1
_REF_FIELD = "link"


class _Lines:
    def __init__(self) -> None:
        self.rows: list[str] = []

    def add(self, indent: int, text: str) -> None:
        self.rows.append("  " * indent + text)

    def text(self) -> str:
        return "\n".join(self.rows) + "\n"


class _FnState:
    """Name pools while generating one function body."""

    def __init__(self) -> None:
        self.counter = 0
        self.ints: list[str] = []
        self.sourceish: list[str] = []  # ints that (may) carry taint
        self.objs: list[tuple[str, Optional[str]]] = []  # (name, type or None)
        self.linked: set[str] = set()  # object vars whose `link` field is set
        self.has_eval = False
        self.has_asmcall = False
        self.has_callback = False

    def fresh(self, prefix: str = "v") -> str:
        name = f"{prefix}{self.counter}"
        self.counter += 1
        return name

    def interesting(self, rng: random.Random) -> str:
        """An int variable, biased toward taint carriers so that sinks and
        boundary arguments actually see flows at run time."""
        if self.sourceish and rng.random() < 0.65:
            return rng.choice(self.sourceish)
        return rng.choice(self.ints)


class _Builder:
    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.int_fields = [f"f{i}" for i in range(max(cfg.fields_per_type,
                                                      _INT_FIELD_COUNT_MIN))]
        self.methods = [f"m{i}" for i in range(cfg.methods_per_type)]
        # One exported entry point per module, plus an internal helper.
        self.asm_exports: list[tuple[str, str, int]] = []  # (module, proc, args needed)

    # -- shared vocabulary --------------------------------------------------

    def method_arity(self, j: int) -> int:
        return 1 + (j % 2)  # receiver plus at most one integer argument

    def unit_name(self, chain_idx: int) -> str:
        return "entry" if chain_idx == 0 else f"mid{chain_idx - 1}"

    def bridge_name(self, chain_idx: int) -> str:
        return f"bx{chain_idx}"

    # -- assembly -----------------------------------------------------------

    def build_asm(self, idx: int) -> tuple[str, str]:
        rng = self.rng
        name = f"am{idx}"
        arity = rng.randint(1, 2)
        lines = _Lines()
        lines.add(0, f"module {name} {{")
        lines.add(1, "global g0")
        lines.add(1, "global g1")
        has_helper = rng.random() < 0.7
        cross = idx + 1 < self.cfg.asm_modules and rng.random() < 0.5

        lines.add(1, "export proc p0 {")
        self._asm_main_body(lines, arity, call_helper=has_helper)
        lines.add(1, "}")
        if has_helper:
            lines.add(1, "proc p1 {")
            self._asm_helper_body(lines, cross_module=f"am{idx + 1}" if cross else None)
            lines.add(1, "}")
        lines.add(0, "}")
        self.asm_exports.append((name, "p0", arity))
        return name, lines.text()

    def _asm_main_body(self, lines: _Lines, arity: int, call_helper: bool) -> None:
        rng = self.rng
        for local in ("t0", "t1", "t2", "c", "lim", "one"):
            lines.add(2, f"local {local}")
        lines.add(2, f"t0 <- const {rng.randint(0, 9)}")
        lines.add(2, "t1 <- load arg0")
        if arity >= 2:
            lines.add(2, "t2 <- load arg1")
        else:
            lines.add(2, f"t2 <- const {rng.randint(0, 9)}")
        op = rng.choice(["add", "sub", "mul"])
        lines.add(2, f"t0 <- {op} t1 t2")
        if rng.random() < 0.6:
            lines.add(2, "store g0 t0")
            lines.add(2, "t1 <- load g0")
        if rng.random() < 0.35:
            trip = rng.randint(1, self.cfg.max_trip)
            lines.add(2, "c <- const 0")
            lines.add(2, f"lim <- const {trip}")
            lines.add(2, "one <- const 1")
            lines.add(2, "loop0: t0 <- add t0 t1")
            lines.add(2, "c <- add c one")
            lines.add(2, "compare c lim")
            lines.add(2, "branchcond done0")
            lines.add(2, "br loop0")
            lines.add(2, "done0: store g1 t0")
        if call_helper and rng.random() < 0.6:
            lines.add(2, "call p1")
            lines.add(2, "t2 <- load ret0")
            lines.add(2, "t0 <- add t0 t2")
        lines.add(2, "ret t0")

    def _asm_helper_body(self, lines: _Lines, cross_module: Optional[str]) -> None:
        rng = self.rng
        lines.add(2, "local h0")
        lines.add(2, "local h1")
        lines.add(2, "h0 <- load g0")
        lines.add(2, f"h1 <- const {rng.randint(1, 5)}")
        lines.add(2, "h0 <- add h0 h1")
        if cross_module:
            lines.add(2, f"call {cross_module}.p0")
            lines.add(2, "h1 <- load ret0")
            lines.add(2, "h0 <- add h0 h1")
        lines.add(2, "store g1 h0")
        lines.add(2, "ret h0")

    # -- host units -----------------------------------------------------------

    def build_unit(self, chain_idx: int, total_hosts: int) -> tuple[str, str]:
        cfg = self.cfg
        name = self.unit_name(chain_idx)
        lines = _Lines()
        lines.add(0, f"unit {name};")
        type_names = [f"T{k}" for k in range(cfg.types_per_unit)]
        for t in type_names:
            lines.add(0, "")
            lines.add(0, f"type {t} {{")
            lines.add(1, f"fields: {', '.join(self.int_fields + [_REF_FIELD])};")
            pairs = ", ".join(f"{m} -> {t.lower()}_{m}" for m in self.methods)
            lines.add(1, f"methods: {pairs};")
            lines.add(0, "}")
        deeper = list(range(chain_idx + 1, total_hosts))
        for t in type_names:
            for j, m in enumerate(self.methods):
                lines.add(0, "")
                self._leaf_method(lines, f"{t.lower()}_{m}", self.method_arity(j))
        if chain_idx > 0:
            lines.add(0, "")
            self._rich_function(lines, "start", (), chain_idx, type_names, deeper,
                                guest=True, force=True)
        if chain_idx == 0:
            lines.add(0, "")
            self._rich_function(lines, "main", (), chain_idx, type_names, deeper,
                                guest=False, force=True)
        for w in range(cfg.functions_per_unit):
            lines.add(0, "")
            self._rich_function(lines, f"w{w}", (), chain_idx, type_names, deeper,
                                guest=False, force=False)
        return name, lines.text()

    def _leaf_method(self, lines: _Lines, fn_name: str, arity: int) -> None:
        rng = self.rng
        params = ["self"] + (["a"] if arity == 2 else [])
        lines.add(0, f"func {fn_name}({', '.join(params)}) {{")
        ints = ["k0"]
        hot = []  # likely taint carriers: the receiver's fields, args, sources
        lines.add(1, f"k0 = {rng.randint(0, 9)};")
        if arity == 2:
            ints.append("a")
            hot.append("a")
        fld = rng.choice(self.int_fields)
        if rng.random() < 0.7:
            lines.add(1, f"p = self.{fld};")
            ints.append("p")
            hot.append("p")
        if rng.random() < 0.5:
            a, b = rng.choice(hot or ints), rng.choice(ints)
            lines.add(1, f"k1 = {a} + {b};")
            ints.append("k1")
            hot.append("k1")
        if rng.random() < 0.4:
            lines.add(1, "s = source();")
            ints.append("s")
            hot.append("s")
        if rng.random() < 0.6:
            lines.add(1, f"self.{rng.choice(self.int_fields)} = {rng.choice(hot or ints)};")
        if self.asm_exports and rng.random() < self.cfg.asmcall_density:
            mod, proc, needed = rng.choice(self.asm_exports)
            args = ", ".join(rng.choice(hot or ints) for _ in range(needed))
            sep = ", " if args else ""
            lines.add(1, f"r = asmcall({mod}.{proc}{sep}{args});")
            ints.append("r")
            hot.append("r")
        if rng.random() < 0.4:
            lines.add(1, f"sink({rng.choice(hot or ints)});")
        lines.add(1, f"return {rng.choice(hot or ints)};")
        lines.add(0, "}")

    def _rich_function(self, lines: _Lines, fn_name: str, params: tuple[str, ...],
                       chain_idx: int, type_names: list[str], deeper: list[int],
                       guest: bool, force: bool) -> None:
        rng = self.rng
        cfg = self.cfg
        st = _FnState()
        lines.add(0, f"func {fn_name}({', '.join(params)}) {{")
        lines.add(1, "one = 1;")
        lines.add(1, f"k0 = {rng.randint(0, 9)};")
        st.ints += ["one", "k0"]
        my_bridge = self.bridge_name(chain_idx) if guest else None

        for _ in range(cfg.statements_per_function):
            kind = rng.choice(self._kinds(st, type_names, deeper, guest))
            self._emit(lines, 1, kind, st, chain_idx, type_names, deeper, my_bridge)

        if force:
            if deeper and cfg.eval_density > 0 and not st.has_eval:
                self._emit(lines, 1, "eval", st, chain_idx, type_names, deeper, my_bridge)
            if self.asm_exports and cfg.asmcall_density > 0 and not st.has_asmcall:
                self._emit(lines, 1, "asmcall", st, chain_idx, type_names, deeper, my_bridge)
            if guest and cfg.callback_density > 0 and not st.has_callback:
                self._emit(lines, 1, "callback", st, chain_idx, type_names, deeper, my_bridge)
        lines.add(1, f"return {rng.choice(st.ints)};")
        lines.add(0, "}")

    def _kinds(self, st: _FnState, type_names: list[str], deeper: list[int],
               guest: bool) -> list[str]:
        cfg = self.cfg
        kinds = ["const", "binop", "source", "sink", "branch", "loop"]
        if type_names:
            kinds += ["alloc"]
        if st.objs:
            kinds += ["own_store", "own_load", "vcall", "vcall", "store_ref"]
        if any(name in st.linked for name, _ in st.objs):
            kinds += ["load_ref"]
        if guest:
            kinds += ["bridge_load", "bridge_store"]
            kinds += ["callback"] * round(cfg.callback_density * 4)
        if deeper:
            kinds += ["eval"] * round(cfg.eval_density * 4)
        if self.asm_exports:
            kinds += ["asmcall"] * round(cfg.asmcall_density * 4)
        return kinds

    def _emit(self, lines: _Lines, indent: int, kind: str, st: _FnState,
              chain_idx: int, type_names: list[str], deeper: list[int],
              my_bridge: Optional[str]) -> None:
        rng = self.rng
        if kind == "const":
            name = st.fresh()
            lines.add(indent, f"{name} = {rng.randint(-5, 9)};")
            st.ints.append(name)
        elif kind == "binop":
            name = st.fresh()
            op = rng.choice(["+", "-", "*"])
            left, right = st.interesting(rng), rng.choice(st.ints)
            lines.add(indent, f"{name} = {left} {op} {right};")
            st.ints.append(name)
            if left in st.sourceish or right in st.sourceish:
                st.sourceish.append(name)
        elif kind == "source":
            name = st.fresh("s")
            lines.add(indent, f"{name} = source();")
            st.ints.append(name)
            st.sourceish.append(name)
        elif kind == "sink":
            lines.add(indent, f"sink({st.interesting(rng)});")
        elif kind == "alloc":
            name = st.fresh("o")
            t = rng.choice(type_names)
            lines.add(indent, f"{name} = new {t}();")
            st.objs.append((name, t))
        elif kind == "own_store":
            obj = rng.choice(st.objs)[0]
            lines.add(indent, f"{obj}.{rng.choice(self.int_fields)} = {st.interesting(rng)};")
        elif kind == "own_load":
            name = st.fresh()
            obj = rng.choice(st.objs)[0]
            lines.add(indent, f"{name} = {obj}.{rng.choice(self.int_fields)};")
            st.ints.append(name)
            st.sourceish.append(name)  # fields are common taint carriers
        elif kind == "store_ref":
            holder = rng.choice(st.objs)[0]
            stored = rng.choice(st.objs)[0]
            lines.add(indent, f"{holder}.{_REF_FIELD} = {stored};")
            st.linked.add(holder)
        elif kind == "load_ref":
            holders = [name for name, _ in st.objs if name in st.linked]
            name = st.fresh("o")
            lines.add(indent, f"{name} = {rng.choice(holders)}.{_REF_FIELD};")
            st.objs.append((name, None))
        elif kind == "vcall":
            obj = rng.choice(st.objs)[0]
            self._call_on(lines, indent, obj, st)
        elif kind == "callback":
            self._call_on(lines, indent, my_bridge, st)
            st.has_callback = True
        elif kind == "bridge_load":
            name = st.fresh()
            lines.add(indent, f"{name} = {my_bridge}.{rng.choice(self.int_fields)};")
            st.ints.append(name)
            st.sourceish.append(name)  # the host may have stored taint here
        elif kind == "bridge_store":
            lines.add(indent, f"{my_bridge}.{rng.choice(self.int_fields)} = {st.interesting(rng)};")
        elif kind == "branch":
            cond_var = rng.choice(st.ints)
            rel = rng.choice(["==", "!=", "<"])
            lines.add(indent, f"if ({cond_var} {rel} {rng.randint(0, 5)}) {{")
            self._restricted(lines, indent + 1, st)
            lines.add(indent, "} else {")
            self._restricted(lines, indent + 1, st)
            lines.add(indent, "}")
        elif kind == "loop":
            lc = st.fresh("lc")
            trip = rng.randint(1, self.cfg.max_trip)
            lines.add(indent, f"{lc} = 0;")
            lines.add(indent, f"while ({lc} < {trip}) {{")
            self._restricted(lines, indent + 1, st)
            lines.add(indent + 1, f"{lc} = {lc} + one;")
            lines.add(indent, "}")
            st.ints.append(lc)
        elif kind == "eval":
            target_idx = rng.choice(deeper)
            target = self.unit_name(target_idx)
            bname = self.bridge_name(target_idx)
            t = rng.choice(type_names)
            lines.add(indent, f"bridge {bname} = new {t}();")
            if rng.random() < 0.8:
                lines.add(indent, f"{bname}.{rng.choice(self.int_fields)} = {st.interesting(rng)};")
            lines.add(indent, f"eval({target}.start, [{bname}]);")
            if rng.random() < 0.8:
                back = st.fresh()
                lines.add(indent, f"{back} = {bname}.{rng.choice(self.int_fields)};")
                st.ints.append(back)
                st.sourceish.append(back)  # the guest may have written taint
            st.has_eval = True
        elif kind == "asmcall":
            mod, proc, needed = rng.choice(self.asm_exports)
            name = st.fresh("r")
            picked = [st.interesting(rng) for _ in range(needed)]
            args = ", ".join(picked)
            sep = ", " if args else ""
            lines.add(indent, f"{name} = asmcall({mod}.{proc}{sep}{args});")
            st.ints.append(name)
            if any(a in st.sourceish for a in picked):
                st.sourceish.append(name)
            st.has_asmcall = True

    def _call_on(self, lines: _Lines, indent: int, receiver: str, st: _FnState) -> None:
        rng = self.rng
        j = rng.randrange(len(self.methods))
        arity = self.method_arity(j)
        args = ", ".join(st.interesting(rng) for _ in range(arity - 1))
        name = st.fresh("r")
        lines.add(indent, f"{name} = {receiver}.{self.methods[j]}({args});")
        st.ints.append(name)
        st.sourceish.append(name)  # method bodies may source or forward taint

    def _restricted(self, lines: _Lines, indent: int, st: _FnState) -> None:
        """Branch and loop bodies: reads from the outer pools only, writes to
        throwaway names, so definite assignment stays obvious."""
        rng = self.rng
        for _ in range(rng.randint(1, 2)):
            pick = rng.random()
            if pick < 0.35:
                lines.add(indent, f"{st.fresh('b')} = {st.interesting(rng)} + {rng.choice(st.ints)};")
            elif pick < 0.55 and st.objs:
                obj = rng.choice(st.objs)[0]
                lines.add(indent, f"{obj}.{rng.choice(self.int_fields)} = {st.interesting(rng)};")
            elif pick < 0.75:
                lines.add(indent, f"sink({st.interesting(rng)});")
            else:
                lines.add(indent, f"{st.fresh('b')} = source();")

    # -- whole program ---------------------------------------------------------

    def build(self) -> ProgramSources:
        cfg = self.cfg
        files: dict[str, str] = {}
        asm_names = []
        for idx in range(cfg.asm_modules):
            name, text = self.build_asm(idx)
            files[f"{name}.asm"] = text
            asm_names.append(name)
        total_hosts = 1 + cfg.middle_units
        host_names = []
        for chain_idx in range(total_hosts):
            name, text = self.build_unit(chain_idx, total_hosts)
            files[f"{name}.poly"] = text
            host_names.append(name)
        manifest = {
            "entry": f"{host_names[0]}.poly",
            "middle": [f"{n}.poly" for n in host_names[1:]],
            "asm": [f"{n}.asm" for n in asm_names],
            "entry_function": "main",
        }
        return ProgramSources(files=files, manifest=manifest)


_FALLBACK = ProgramSources(
    files={
        "entry.poly": (
            "unit entry;\n\n"
            "type T0 {\n  fields: f0;\n  methods: m0 -> t0_m0;\n}\n\n"
            "func t0_m0(self) {\n  p = self.f0;\n  return p;\n}\n\n"
            "func main() {\n  x = source();\n  v = new T0();\n  v.f0 = x;\n"
            "  y = v.m0();\n  sink(y);\n  return y;\n}\n"
        ),
    },
    manifest={"entry": "entry.poly", "middle": [], "asm": [],
              "entry_function": "main"},
)


def generate_sources(config: GenConfig) -> ProgramSources:
    """Deterministic sources for `config`; falls back to a fixed template if
    the randomized construction keeps failing its own link gate."""
    for attempt in range(config.max_attempts):
        rng = random.Random(f"gen:{config.seed}:{attempt}")
        sources = _Builder(config, rng).build()
        try:
            link_sources(sources)
        except LinkError:
            continue
        return sources
    return _FALLBACK


def link_sources(sources: ProgramSources) -> PolyglotProgram:
    entry_file = sources.manifest["entry"]
    entry = parse_host(sources.files[entry_file], source=entry_file)
    middles = [parse_host(sources.files[f], source=f) for f in sources.manifest["middle"]]
    asms = [parse_asm(sources.files[f], source=f) for f in sources.manifest["asm"]]
    return link_units(entry, middles, asms, sources.manifest["entry_function"])


def generate(config: GenConfig) -> PolyglotProgram:
    """A linked, well-formed, terminating program; deterministic per seed."""
    return link_sources(generate_sources(config))


def gen_edit(config: GenConfig, program: PolyglotProgram) -> Edit:
    """A deterministic body-replacement edit that passes its checker.

    Targets are drawn from the functions whose result no caller consumes as an
    object: the entry function, eval targets, and assembly procedures.
    """
    from .callgraph import build_cha

    rng = random.Random(f"edit:{config.seed}")
    reachable = build_cha(program).nodes
    candidates = {program.entry_node}
    for binding in program.bindings.eval_sites.values():
        candidates.add(program.node_for(binding.unit, binding.function))
    candidates.update(n for n in program.procs if n in reachable)
    pool = sorted(candidates & reachable) or [program.entry_node]
    target = rng.choice(pool)

    if target in program.procs:
        body = _asm_replacement(rng, program, target)
    else:
        body = _host_replacement(rng, program)
    edit = Edit(target, body)
    apply_edit(program, edit)  # generation gate: must check and re-link
    return edit


def _host_replacement(rng: random.Random, program: PolyglotProgram) -> str:
    rows = ["{", f"  e0 = {rng.randint(0, 9)};", f"  e1 = {rng.randint(0, 9)};",
            "  e2 = e0 + e1;"]
    if rng.random() < 0.6:
        rows.append("  sx = source();")
        rows.append("  sink(sx);")
    exports = []
    for mod_name, module in sorted(program.asm_modules.items()):
        for proc in module.procedures:
            if proc.exported:
                exports.append((mod_name, proc.name, arg_usage(module, proc.name) + 1))
    if exports and rng.random() < 0.6:
        mod, proc, needed = rng.choice(exports)
        args = ", ".join(["e0", "e1", "e2"][:needed])
        sep = ", " if args else ""
        rows.append(f"  e3 = asmcall({mod}.{proc}{sep}{args});")
        rows.append("  sink(e3);")
    rows.append("  return e2;")
    rows.append("}")
    return "\n".join(rows)


def _asm_replacement(rng: random.Random, program: PolyglotProgram,
                     target: NodeId) -> str:
    module = program.asm_modules[target.container]
    usable_args = arg_usage(module, target.function)
    rows = ["{", "  local t0", "  local t1", f"  t0 <- const {rng.randint(0, 9)}"]
    if usable_args >= 0 and rng.random() < 0.6:
        rows.append(f"  t1 <- load arg{rng.randint(0, usable_args)}")
        rows.append("  t0 <- add t0 t1")
    rows.append("  ret t0")
    rows.append("}")
    return "\n".join(rows)
