"""Concrete interpreter for linked programs, and the trace it records.

The interpreter is the ground truth the static results are judged against:
every call edge it takes and every tainted value reaching a sink is recorded
in a DynamicTrace. Runs are deterministic, values are 64-bit wrapping
integers or object references, and object fields live in a single logical
heap regardless of which language touched them.

Dispatch rules:

* `v.m(...)` looks up `m` in the method table of the receiver's allocation
  type and passes the receiver as the implicit first argument. A callee in
  the caller's own unit is a direct-virtual call; a callee in another unit is
  a bridge callback running with a fresh (empty) exposure environment.
* `eval(u.f, [i...])` binds the listed bridge objects as free names for the
  guest activation; same-unit direct calls inherit that environment.
* `v = asmcall(mod.p, args)` marshals integers into `arg0..argN` of the
  target module, runs the exported procedure, and yields its `ret0`.

Reads of missing object fields and of unwritten assembly slots produce an
untainted zero; falling off the end of a procedure is an implicit `ret 0`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .asmlang import (
    Br, BranchCond, Call, Compare, Const, Load, Op, Ret, Store,
)
from .hostlang import (
    Alloc, AsmCall, BinOp, BridgeAlloc, Cond, ConstAssign, Eval, FieldLoad,
    FieldStore, If, MethodCall, Return, SinkCall, SourceAssign, Stmt, While,
)
from .linker import (
    MECH_ASM_DIRECT, MECH_ASMCALL, MECH_BRIDGE, MECH_DIRECT, MECH_EVAL,
    NodeId, PolyglotProgram,
)

DEFAULT_STEP_LIMIT = 100_000
_DEPTH_LIMIT = 200

_U64 = 1 << 64
_I64_MIN = -(1 << 63)


def wrap64(value: int) -> int:
    """Two's-complement 64-bit wrap."""
    return (value - _I64_MIN) % _U64 + _I64_MIN


@dataclass(frozen=True)
class Int:
    value: int
    taint: frozenset[str] = frozenset()  # source site ids carried by the value


@dataclass(frozen=True)
class ObjRef:
    site: str  # allocation site id
    oid: int   # heap identity

Value = Union[Int, ObjRef]

_ZERO = Int(0)

CallEdge = tuple[NodeId, str, NodeId, str]  # caller, site, callee, mechanism
TaintFlow = tuple[str, str]                 # source site, sink site


@dataclass
class DynamicTrace:
    call_edges: set[CallEdge] = field(default_factory=set)
    taint_flows: set[TaintFlow] = field(default_factory=set)
    steps: int = 0

    def to_json_dict(self) -> dict:
        return {
            "call_edges": [
                {"caller": c.key, "site": s, "callee": t.key, "mechanism": m}
                for c, s, t, m in sorted(self.call_edges,
                                         key=lambda e: (e[0].key, e[1], e[2].key, e[3]))
            ],
            "taint_flows": [
                {"source": a, "sink": b} for a, b in sorted(self.taint_flows)
            ],
            "steps": self.steps,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DynamicTrace":
        trace = cls(steps=int(data.get("steps", 0)))
        for e in data.get("call_edges", []):
            trace.call_edges.add((node_from_key(e["caller"]), e["site"],
                                  node_from_key(e["callee"]), e["mechanism"]))
        for f in data.get("taint_flows", []):
            trace.taint_flows.add((f["source"], f["sink"]))
        return trace


def node_from_key(key: str) -> NodeId:
    provenance, rest = key.split("/", 1)
    container, function = rest.rsplit(".", 1)
    return NodeId(provenance, container, function)


OUTCOME_COMPLETED = "completed"
OUTCOME_STEP_LIMIT = "step-limit-exceeded"
OUTCOME_FAULT = "runtime-fault"


@dataclass
class RunResult:
    outcome: str
    trace: DynamicTrace
    fault: Optional[str] = None

    def to_json_dict(self) -> dict:
        out = {"outcome": self.outcome, "trace": self.trace.to_json_dict()}
        if self.fault is not None:
            out["fault"] = self.fault
        return out


class _Fault(Exception):
    def __init__(self, description: str):
        super().__init__(description)
        self.description = description


class _StepLimit(Exception):
    pass


class _Interp:
    def __init__(self, program: PolyglotProgram, step_limit: int):
        self.program = program
        self.step_limit = step_limit
        self.trace = DynamicTrace()
        self.heap: dict[int, dict[str, Value]] = {}
        self.obj_meta: dict[int, tuple[str, str]] = {}  # oid -> (unit, type)
        self.asm_globals: dict[str, dict[str, Value]] = {}
        self.next_oid = 0
        self.depth = 0

    # -- bookkeeping ---------------------------------------------------------

    def step(self) -> None:
        if self.trace.steps >= self.step_limit:
            raise _StepLimit()
        self.trace.steps += 1

    def edge(self, caller: NodeId, site: str, callee: NodeId, mech: str) -> None:
        self.trace.call_edges.add((caller, site, callee, mech))

    def allocate(self, unit: str, type_name: str, site: str) -> ObjRef:
        oid = self.next_oid
        self.next_oid += 1
        self.heap[oid] = {}
        self.obj_meta[oid] = (unit, type_name)
        return ObjRef(site, oid)

    # -- host execution --------------------------------------------------------

    def call_host(self, node: NodeId, args: list[Value],
                  bridge_env: dict[str, Value]) -> Value:
        info = self.program.host_info(node)
        if len(args) != len(info.decl.params):
            raise _Fault(
                f"arity mismatch calling {node.key}: expected "
                f"{len(info.decl.params)} argument(s), got {len(args)}"
            )
        if self.depth >= _DEPTH_LIMIT:
            raise _Fault("activation depth exceeded")
        self.depth += 1
        try:
            env = dict(zip(info.decl.params, args))
            result = self.exec_block(info, info.decl.body, env, bridge_env)
            return result if result is not None else _ZERO
        finally:
            self.depth -= 1

    def exec_block(self, info, body: tuple[Stmt, ...], env: dict[str, Value],
                   bridge_env: dict[str, Value]) -> Optional[Value]:
        for stmt in body:
            result = self.exec_stmt(info, stmt, env, bridge_env)
            if result is not None:
                return result
        return None

    def read(self, info, name: str, env: dict[str, Value],
             bridge_env: dict[str, Value]) -> Value:
        if name in env:
            return env[name]
        if name in bridge_env:
            return bridge_env[name]
        if name in info.free:
            raise _Fault(f"read of unexposed bridge name '{name}' in {info.node.key}")
        raise _Fault(f"read of undefined variable '{name}' in {info.node.key}")

    def read_int(self, info, name: str, env, bridge_env, what: str) -> Int:
        value = self.read(info, name, env, bridge_env)
        if not isinstance(value, Int):
            raise _Fault(f"{what} on object reference '{name}' in {info.node.key}")
        return value

    def eval_cond(self, info, cond: Cond, env, bridge_env) -> bool:
        lhs = self.read_int(info, cond.lhs, env, bridge_env, "comparison").value
        if isinstance(cond.rhs, int):
            rhs = cond.rhs
        else:
            rhs = self.read_int(info, cond.rhs, env, bridge_env, "comparison").value
        if cond.rel == "eq":
            return lhs == rhs
        if cond.rel == "ne":
            return lhs != rhs
        return lhs < rhs

    def exec_stmt(self, info, stmt: Stmt, env: dict[str, Value],
                  bridge_env: dict[str, Value]) -> Optional[Value]:
        self.step()
        if isinstance(stmt, (Alloc, BridgeAlloc)):
            site = info.site(stmt)
            env[stmt.target] = self.allocate(info.unit_name, stmt.type_name, site)
            return None
        if isinstance(stmt, Return):
            return self.read(info, stmt.var, env, bridge_env)
        if isinstance(stmt, MethodCall):
            env[stmt.target] = self.dispatch_method(info, stmt, env, bridge_env)
            return None
        if isinstance(stmt, FieldLoad):
            obj = self.receiver(info, stmt.receiver, env, bridge_env)
            self.check_field(obj, stmt.field_name)
            env[stmt.target] = self.heap[obj.oid].get(stmt.field_name, _ZERO)
            return None
        if isinstance(stmt, FieldStore):
            obj = self.receiver(info, stmt.receiver, env, bridge_env)
            self.check_field(obj, stmt.field_name)
            self.heap[obj.oid][stmt.field_name] = self.read(info, stmt.value, env, bridge_env)
            return None
        if isinstance(stmt, If):
            branch = stmt.then if self.eval_cond(info, stmt.cond, env, bridge_env) else stmt.orelse
            return self.exec_block(info, branch, env, bridge_env)
        if isinstance(stmt, While):
            while self.eval_cond(info, stmt.cond, env, bridge_env):
                result = self.exec_block(info, stmt.body, env, bridge_env)
                if result is not None:
                    return result
                self.step()  # one step per iteration, on the condition recheck
            return None
        if isinstance(stmt, BinOp):
            left = self.read_int(info, stmt.left, env, bridge_env, "arithmetic")
            right = self.read_int(info, stmt.right, env, bridge_env, "arithmetic")
            if stmt.op == "add":
                raw = left.value + right.value
            elif stmt.op == "sub":
                raw = left.value - right.value
            else:
                raw = left.value * right.value
            env[stmt.target] = Int(wrap64(raw), left.taint | right.taint)
            return None
        if isinstance(stmt, ConstAssign):
            env[stmt.target] = Int(wrap64(stmt.value))
            return None
        if isinstance(stmt, Eval):
            site = info.site(stmt)
            binding = self.program.bindings.eval_sites[site]
            exposure: dict[str, Value] = {}
            for name in binding.exposed:
                value = self.read(info, name, env, bridge_env)
                if not isinstance(value, ObjRef):
                    raise _Fault(f"exposed name '{name}' is not an object at {site}")
                exposure[name] = value
            callee = self.program.node_for(binding.unit, binding.function)
            self.edge(info.node, site, callee, MECH_EVAL)
            self.call_host(callee, [], exposure)  # guest return value is discarded
            return None
        if isinstance(stmt, AsmCall):
            site = info.site(stmt)
            binding = self.program.bindings.asm_sites[site]
            argvals: list[Value] = []
            for arg in stmt.args:
                value = self.read(info, arg, env, bridge_env)
                if not isinstance(value, Int):
                    raise _Fault(f"object passed to asmcall at {site}")
                argvals.append(value)
            callee = NodeId("bottom", binding.module, binding.proc)
            self.edge(info.node, site, callee, MECH_ASMCALL)
            store = self.module_store(binding.module)
            for k, value in enumerate(argvals):
                store[f"arg{k}"] = value
            env[stmt.target] = self.call_proc(callee)
            return None
        if isinstance(stmt, SourceAssign):
            env[stmt.target] = Int(0, frozenset({info.site(stmt)}))
            return None
        if isinstance(stmt, SinkCall):
            value = self.read(info, stmt.var, env, bridge_env)
            if isinstance(value, Int) and value.taint:
                sink_site = info.site(stmt)
                for source_site in value.taint:
                    self.trace.taint_flows.add((source_site, sink_site))
            return None
        raise _Fault(f"unexecutable statement {stmt!r}")  # pragma: no cover

    def receiver(self, info, name: str, env, bridge_env) -> ObjRef:
        value = self.read(info, name, env, bridge_env)
        if not isinstance(value, ObjRef):
            raise _Fault(f"field access on integer '{name}' in {info.node.key}")
        return value

    def check_field(self, obj: ObjRef, fname: str) -> None:
        unit, type_name = self.obj_meta[obj.oid]
        decl = self.program.types[(unit, type_name)]
        if fname not in decl.fields:
            raise _Fault(f"no field '{fname}' on type '{unit}.{type_name}'")

    def dispatch_method(self, info, stmt: MethodCall, env, bridge_env) -> Value:
        receiver = self.receiver(info, stmt.receiver, env, bridge_env)
        unit, type_name = self.obj_meta[receiver.oid]
        decl = self.program.types[(unit, type_name)]
        target = decl.method_map().get(stmt.method)
        if target is None:
            raise _Fault(f"method '{stmt.method}' missing on type '{unit}.{type_name}'")
        callee = self.program.node_for(unit, target)
        site = info.site(stmt)
        mech = MECH_DIRECT if unit == info.unit_name else MECH_BRIDGE
        self.edge(info.node, site, callee, mech)
        args: list[Value] = [receiver]
        for a in stmt.args:
            args.append(self.read(info, a, env, bridge_env))
        # Same-unit calls run under the current exposure; callbacks do not.
        callee_env = bridge_env if mech == MECH_DIRECT else {}
        return self.call_host(callee, args, callee_env)

    # -- assembly execution ----------------------------------------------------

    def module_store(self, module: str) -> dict[str, Value]:
        return self.asm_globals.setdefault(module, {})

    def call_proc(self, node: NodeId) -> Int:
        if self.depth >= _DEPTH_LIMIT:
            raise _Fault("activation depth exceeded")
        self.depth += 1
        try:
            return self.exec_proc(node)
        finally:
            self.depth -= 1

    def exec_proc(self, node: NodeId) -> Int:
        info = self.program.proc_info(node)
        store = self.module_store(info.module_name)
        local_set = set(info.decl.locals)
        locals_: dict[str, Int] = {}
        flag = False
        pc = 0
        body = info.decl.body

        def read_local(name: str) -> Int:
            return locals_.get(name, _ZERO)

        def read_slot(name: str) -> Int:
            if name in local_set:
                return read_local(name)
            value = store.get(name, _ZERO)
            return value if isinstance(value, Int) else _ZERO

        while pc < len(body):
            self.step()
            i = body[pc].instr
            if isinstance(i, Load):
                locals_[i.dest] = read_slot(i.src)
            elif isinstance(i, Store):
                if i.dest in local_set:
                    locals_[i.dest] = read_local(i.src)
                else:
                    store[i.dest] = read_local(i.src)
            elif isinstance(i, Const):
                locals_[i.dest] = Int(wrap64(i.value))
            elif isinstance(i, Op):
                left, right = read_local(i.left), read_local(i.right)
                if i.op == "add":
                    raw = left.value + right.value
                elif i.op == "sub":
                    raw = left.value - right.value
                else:
                    raw = left.value * right.value
                locals_[i.dest] = Int(wrap64(raw), left.taint | right.taint)
            elif isinstance(i, Compare):
                flag = read_local(i.left).value == read_local(i.right).value
            elif isinstance(i, Br):
                pc = info.labels[i.label]
                continue
            elif isinstance(i, BranchCond):
                if flag:
                    pc = info.labels[i.label]
                    continue
            elif isinstance(i, Ret):
                value = read_local(i.src)
                store["ret0"] = value
                return value
            elif isinstance(i, Call):
                target_mod = i.module or info.module_name
                callee = NodeId("bottom", target_mod, i.proc)
                self.edge(node, info.site(pc), callee, MECH_ASM_DIRECT)
                result = self.call_proc(callee)
                if target_mod != info.module_name:
                    # The convention materializes the callee's result in the
                    # caller's ret0 so it is loadable without crossing modules.
                    store["ret0"] = result
            pc += 1
        store["ret0"] = _ZERO  # implicit ret of 0 when execution falls off the end
        return _ZERO


def run(program: PolyglotProgram, step_limit: int = DEFAULT_STEP_LIMIT) -> RunResult:
    """Execute the program from its entry function under a step budget."""
    if step_limit <= 0:
        raise ValueError("step_limit must be positive")
    interp = _Interp(program, step_limit)
    try:
        interp.call_host(program.entry_node, [], {})
    except _StepLimit:
        return RunResult(OUTCOME_STEP_LIMIT, interp.trace)
    except _Fault as fault:
        return RunResult(OUTCOME_FAULT, interp.trace, fault=fault.description)
    return RunResult(OUTCOME_COMPLETED, interp.trace)
