from __future__ import annotations

import json

from conftest import link_text
from trilang.hostlang import SinkCall
from trilang.interp import DynamicTrace, node_from_key, run
from trilang.linker import NodeId


def test_bridge_callback_edge(bridge_program):
    result = run(bridge_program)
    assert result.outcome == "completed"
    edge = (NodeId("middle", "mid", "start"), "mid:start:0",
            NodeId("entry", "entry", "b_get"), "bridge-callback")
    assert edge in result.trace.call_edges


def test_asm_taint_roundtrip_is_the_six_step_oracle(asmtaint_program):
    # Hand evaluation: source, asmcall, load, ret, sink, return = 6 steps,
    # and the tainted value flows from statement 0 to the sink at statement 2.
    result = run(asmtaint_program)
    assert result.outcome == "completed"
    assert result.trace.steps == 6
    assert result.trace.taint_flows == {("entry:main:0", "entry:main:2")}


def test_never_true_loop_completes():
    program = link_text(
        "unit entry;\nfunc main() { x = 0; while (x != x) { x = x + x; } return x; }\n"
    )
    result = run(program)
    assert result.outcome == "completed"
    assert result.trace.steps < 10
    assert not result.trace.call_edges


def test_determinism(threehop_program):
    a = run(threehop_program)
    b = run(threehop_program)
    assert a.outcome == b.outcome
    assert a.trace.steps == b.trace.steps
    assert a.trace.call_edges == b.trace.call_edges
    assert a.trace.taint_flows == b.trace.taint_flows


def test_trace_monotone_in_step_limit(threehop_program):
    full = run(threehop_program)
    previous_edges: set = set()
    for limit in range(1, full.trace.steps + 1):
        partial = run(threehop_program, step_limit=limit)
        assert previous_edges <= partial.trace.call_edges
        assert partial.trace.call_edges <= full.trace.call_edges
        assert partial.trace.taint_flows <= full.trace.taint_flows
        previous_edges = partial.trace.call_edges
    assert run(threehop_program, step_limit=3).outcome == "step-limit-exceeded"


def test_method_missing_faults():
    program = link_text(
        "unit entry;\ntype T { fields: ; methods: }\n"
        "func main() { v = new T(); x = v.nope(); return x; }\n"
    )
    result = run(program)
    assert result.outcome == "runtime-fault"
    assert "method 'nope' missing" in result.fault


def test_unexposed_bridge_read_faults_with_prefix_trace():
    # start2 reads i, but only start is called with i exposed; the second
    # eval exposes nothing, so the guest read faults at runtime.
    entry = (
        "unit entry;\ntype B { fields: f0; methods: }\n"
        "func main() { bridge i = new B(); eval(mid.start, [i]); "
        "eval(mid.start2, []); x = 0; return x; }\n"
    )
    mid = ("unit mid;\nfunc start() { p = i.f0; return p; }\n"
           "func start2() { q = i.f0; return q; }\n")
    program = link_text(entry, middles=(mid,))
    result = run(program)
    assert result.outcome == "runtime-fault"
    assert "unexposed bridge name 'i'" in result.fault
    # Prefix semantics: the first eval did happen and is in the trace.
    mechanisms = {e[3] for e in result.trace.call_edges}
    assert "eval" in mechanisms


def test_object_passed_to_asmcall_faults_when_not_statically_obvious():
    entry = (
        "unit entry;\ntype T { fields: ; methods: }\n"
        "func main() { k = 0; if (k == 0) { v = new T(); } else { v = 1; } "
        "y = asmcall(cmod.id, v); return y; }\n"
    )
    cmod = "module cmod { export proc id { local l \n l <- load arg0 \n ret l } }"
    program = link_text(entry, asms=(cmod,))
    result = run(program)
    assert result.outcome == "runtime-fault"
    assert "object passed to asmcall" in result.fault


def test_arithmetic_wraps_at_64_bits():
    program = link_text(
        "unit entry;\nfunc main() { big = 9223372036854775807; one = 1; "
        "x = big + one; sink(x); return x; }\n"
    )
    assert run(program).outcome == "completed"


def test_uninitialized_reads_are_zero():
    entry = (
        "unit entry;\ntype T { fields: f0; methods: }\n"
        "func main() { v = new T(); x = v.f0; y = asmcall(m.p); z = x + y; return z; }\n"
    )
    cmod = "module m { global g \n export proc p { local l \n l <- load g \n ret l } }"
    program = link_text(entry, asms=(cmod,))
    assert run(program).outcome == "completed"


def test_asm_module_globals_persist_across_calls():
    entry = (
        "unit entry;\nfunc main() { x = source(); a = asmcall(m.put, x); "
        "b = asmcall(m.take); sink(b); return b; }\n"
    )
    cmod = ("module m { global g \n"
            " export proc put { local l \n l <- load arg0 \n store g l \n ret l }\n"
            " export proc take { local l \n l <- load g \n ret l } }")
    program = link_text(entry, asms=(cmod,))
    result = run(program)
    assert result.outcome == "completed"
    assert result.trace.taint_flows == {("entry:main:0", "entry:main:3")}


def test_taint_flows_only_at_sink_statements(threehop_program, alias_program):
    from trilang.generator import GenConfig, generate

    programs = [threehop_program, alias_program]
    programs += [generate(GenConfig(seed=s)) for s in range(20)]
    flows_seen = 0
    for program in programs:
        trace = run(program).trace
        for _source, sink_site in trace.taint_flows:
            container, function, idx = sink_site.rsplit(":", 2)
            info = program.host_info(program.node_for(container, function))
            assert isinstance(info.stmts[int(idx)], SinkCall)
            flows_seen += 1
    assert flows_seen > 2


def test_trace_json_roundtrip(threehop_program):
    trace = run(threehop_program).trace
    data = json.loads(json.dumps(trace.to_json_dict()))
    back = DynamicTrace.from_json_dict(data)
    assert back.call_edges == trace.call_edges
    assert back.taint_flows == trace.taint_flows
    assert back.steps == trace.steps


def test_node_key_roundtrip():
    node = NodeId("middle", "mid0", "start")
    assert node_from_key(node.key) == node
