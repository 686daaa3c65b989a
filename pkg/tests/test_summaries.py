from __future__ import annotations

from conftest import link_text
from trilang.callgraph import build_onthefly
from trilang.summaries import (
    AccessPath, ExternalFacts, FunctionSummary, summarize_function,
)


def _program_with_identity():
    entry = (
        "unit entry;\n"
        "type T { fields: g; methods: id -> id; }\n"
        "func id(a) { return a; }\n"
        "func main() { v = new T(); r = v.id(v); return r; }\n"
    )
    return link_text(entry)


def test_identity_summary():
    program = _program_with_identity()
    node = program.node_for("entry", "id")
    summary = summarize_function(program, node)
    assert (AccessPath("ret"), AccessPath("param:0")) in summary.pts_effects
    assert ("param:0", "ret") in summary.taint_transfer
    assert summary.obligations == ()


def test_asm_identity_summary(asmtaint_program):
    node = asmtaint_program.node_for("cmod", "id")
    summary = summarize_function(asmtaint_program, node)
    assert ("asm:cmod:arg0", "asm:cmod:ret0") in summary.taint_transfer
    assert summary.pts_effects == frozenset()


def test_guest_summary_records_pending_bridge_obligation():
    entry = (
        "unit entry;\n"
        "type B { fields: f0; methods: get -> b_get; }\n"
        "func b_get(self) { r = self.f0; return r; }\n"
        "func main() { bridge i = new B(); eval(mid.start, [i]); x = 0; return x; }\n"
    )
    mid = "unit mid;\nfunc start() { x = i.get(); sink(x); return x; }\n"
    program = link_text(entry, middles=(mid,))
    node = program.node_for("mid", "start")
    summary = summarize_function(program, node)  # no host facts supplied
    (ob,) = summary.obligations
    assert ob.kind == "bridge-call"
    assert ob.callee == "i.get"
    assert ob.resolved == ()
    call_site = "mid:start:0"
    sink_site = "mid:start:1"
    # The sink depends on the unresolved call's result.
    assert (f"call:{call_site}", f"sink:{sink_site}") in summary.taint_transfer


def test_obligation_resolves_with_external_facts():
    entry = (
        "unit entry;\n"
        "type B { fields: f0; methods: get -> b_get; }\n"
        "func b_get(self) { r = self.f0; return r; }\n"
        "func main() { bridge i = new B(); eval(mid.start, [i]); x = 0; return x; }\n"
    )
    mid = "unit mid;\nfunc start() { x = i.get(); sink(x); return x; }\n"
    program = link_text(entry, middles=(mid,))
    _graph, result = build_onthefly(program)
    start = program.node_for("mid", "start")
    summary = result.summaries[start]
    (ob,) = summary.obligations
    assert ob.resolved == ("entry/entry.b_get",)
    # With the callee summary instantiated, the sink sees the bridge field.
    assert ("bridge:i.f0", "sink:mid:start:1") in summary.taint_transfer


def test_summaries_refine_monotonically():
    entry = (
        "unit entry;\n"
        "type B { fields: f0; methods: get -> b_get; }\n"
        "func b_get(self) { r = self.f0; return r; }\n"
        "func main() { bridge i = new B(); eval(mid.start, [i]); x = 0; return x; }\n"
    )
    mid = "unit mid;\nfunc start() { x = i.get(); sink(x); return x; }\n"
    program = link_text(entry, middles=(mid,))
    start = program.node_for("mid", "start")
    b_get = program.node_for("entry", "b_get")

    weak = summarize_function(program, start)
    strong_external = ExternalFacts(
        summaries={b_get: summarize_function(program, b_get)},
        site_targets={"mid:start:0": (b_get,)},
    )
    strong = summarize_function(program, start, strong_external)

    assert weak.pts_effects <= strong.pts_effects
    assert weak.taint_transfer <= strong.taint_transfer
    by_site_weak = {o.site: o for o in weak.obligations}
    by_site_strong = {o.site: o for o in strong.obligations}
    assert set(by_site_weak) == set(by_site_strong)
    for site, ob in by_site_weak.items():
        assert set(ob.resolved) <= set(by_site_strong[site].resolved)


def test_access_paths_widen_beyond_depth_two():
    entry = (
        "unit entry;\n"
        "type T { fields: g; methods: }\n"
        "func deep(a) { x = a.g; y = x.g; z = y.g; return z; }\n"
        "func main() { v = new T(); k = 0; return k; }\n"
    )
    program = link_text(entry)
    summary = summarize_function(program, program.node_for("entry", "deep"))
    widened = {p for _lhs, p in summary.pts_effects if p.widened}
    widened |= {lhs for lhs, _rhs in summary.pts_effects if lhs.widened}
    assert any(p.root == "param:0" for p in widened)
    path = AccessPath("param:0", ("g", "g"), widened=True)
    assert path.extend("h") == path  # widened paths absorb extensions
    assert path.text == "param:0.g.g.*"


def test_field_store_effects_on_parameters():
    entry = (
        "unit entry;\n"
        "type T { fields: g; methods: put -> put; }\n"
        "func put(self, v) { self.g = v; return v; }\n"
        "func main() { t = new T(); x = 1; r = t.put(x); return r; }\n"
    )
    program = link_text(entry)
    summary = summarize_function(program, program.node_for("entry", "put"))
    assert (AccessPath("param:0", ("g",)), AccessPath("param:1")) in summary.pts_effects
    assert ("param:1", "param:0.g") in summary.taint_transfer


def test_summary_json_shape():
    program = _program_with_identity()
    summary = summarize_function(program, program.node_for("entry", "id"))
    data = summary.to_json_dict()
    assert data["node"] == "entry/entry.id"
    assert {"path": "ret", "value": "param:0"} in data["pts_effects"]
    assert isinstance(summary, FunctionSummary)
