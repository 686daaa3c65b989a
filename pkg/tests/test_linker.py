from __future__ import annotations

import json

import pytest

from conftest import link_text
from trilang.diagnostics import LinkError
from trilang.hostlang import AsmCall, Eval, iter_statements
from trilang.linker import (
    AsmBinding, EvalBinding, UnknownSiteError, link, load_manifest,
    lookup_binding,
)

_MID = "unit mid;\nfunc start() { x = i.get(); return x; }\n"
_CMOD = "module cmod {\n  export proc compute { local l \n l <- load arg0 \n ret l }\n  proc helper { local h \n h <- const 1 \n ret h }\n}"


def _entry(body: str) -> str:
    return ("unit entry;\ntype B { fields: f0; methods: get -> b_get; }\n"
            "func b_get(self) { r = self.f0; return r; }\n"
            f"func main() {{ {body} }}\n")


def test_link_resolves_eval_and_asm_sites():
    program = link_text(
        _entry("bridge i = new B(); eval(mid.start, [i]); x = 1; "
               "y = asmcall(cmod.compute, x); return y;"),
        middles=(_MID,), asms=(_CMOD,),
    )
    assert len(program.bindings.eval_sites) == 1
    assert len(program.bindings.asm_sites) == 1
    (eval_site,) = program.bindings.eval_sites
    (asm_site,) = program.bindings.asm_sites
    assert lookup_binding(program, eval_site) == EvalBinding(eval_site, "mid", "start", ("i",))
    assert lookup_binding(program, asm_site) == AsmBinding(asm_site, "cmod", "compute", 1)
    with pytest.raises(UnknownSiteError):
        lookup_binding(program, "entry:main:99")


def test_unresolved_guest_function():
    with pytest.raises(LinkError) as err:
        link_text(_entry("bridge i = new B(); eval(mid.missing, []); x = 0; return x;"),
                  middles=(_MID,))
    assert any("unresolved guest function mid.missing" in m
               for m in err.value.diagnostics.messages())


def test_non_exported_asm_target():
    with pytest.raises(LinkError) as err:
        link_text(_entry("x = 1; y = asmcall(cmod.helper, x); return y;"),
                  asms=(_CMOD,))
    assert any("target not exported" in m for m in err.value.diagnostics.messages())


def test_arity_mismatch_against_arg_usage():
    with pytest.raises(LinkError) as err:
        link_text(_entry("y = asmcall(cmod.compute); return y;"), asms=(_CMOD,))
    assert any("arity mismatch" in m for m in err.value.diagnostics.messages())


def test_object_argument_rejected():
    with pytest.raises(LinkError) as err:
        link_text(_entry("v = new B(); y = asmcall(cmod.compute, v); return y;"),
                  asms=(_CMOD,))
    assert any("object argument" in m for m in err.value.diagnostics.messages())


def test_eval_direction_rules():
    upward = "unit mid;\nfunc start() { eval(entry.main, []); x = 0; return x; }\n"
    with pytest.raises(LinkError) as err:
        link_text(_entry("bridge i = new B(); eval(mid.start, [i]); x = 0; return x;"),
                  middles=(upward,))
    assert any("cannot be an eval target" in m for m in err.value.diagnostics.messages())

    mid_self = "unit mid;\nfunc start() { eval(mid.start, []); x = 0; return x; }\n"
    with pytest.raises(LinkError) as err:
        link_text(_entry("bridge i = new B(); eval(mid.start, [i]); x = 0; return x;"),
                  middles=(mid_self,))
    assert any("cannot eval itself" in m for m in err.value.diagnostics.messages())


def test_eval_target_must_take_no_parameters():
    mid = "unit mid;\nfunc start(a) { return a; }\n"
    with pytest.raises(LinkError) as err:
        link_text(_entry("bridge i = new B(); eval(mid.start, [i]); x = 0; return x;"),
                  middles=(mid,))
    assert any("must take no parameters" in m for m in err.value.diagnostics.messages())


def test_entry_free_names_rejected():
    with pytest.raises(LinkError) as err:
        link_text("unit entry;\nfunc main() { x = ghost.f0; return x; }\n")
    assert any("never receives bridge exposures" in m
               for m in err.value.diagnostics.messages())


def test_guest_free_name_needs_some_exposure():
    mid = "unit mid;\nfunc start() { x = other.f0; return x; }\n"
    with pytest.raises(LinkError) as err:
        link_text(_entry("bridge i = new B(); eval(mid.start, [i]); x = 0; return x;"),
                  middles=(mid,))
    assert any("exposed by no eval site" in m for m in err.value.diagnostics.messages())


def test_cross_module_asm_call_validation():
    bad = "module m2 {\n  export proc q { local l \n call cmod.helper \n l <- const 0 \n ret l }\n}"
    with pytest.raises(LinkError) as err:
        link_text(_entry("x = 1; y = asmcall(cmod.compute, x); return y;"),
                  asms=(_CMOD, bad))
    assert any("target not exported: 'cmod.helper'" in m
               for m in err.value.diagnostics.messages())


def test_entry_function_must_exist_and_be_nullary():
    with pytest.raises(LinkError) as err:
        link_text("unit entry;\nfunc main(a) { return a; }\n")
    assert any("must take no parameters" in m for m in err.value.diagnostics.messages())
    with pytest.raises(LinkError) as err:
        link_text("unit entry;\nfunc other() { x = 0; return x; }\n")
    assert any("does not exist" in m for m in err.value.diagnostics.messages())


def test_duplicate_container_names():
    dup = "module entry { export proc p { local l \n l <- const 0 \n ret l } }"
    with pytest.raises(LinkError) as err:
        link_text(_entry("x = 0; return x;"), asms=(dup,))
    assert any("duplicate unit/module name" in m for m in err.value.diagnostics.messages())


def test_binding_totality_by_ast_sweep(threehop_program):
    program = threehop_program
    for info in program.functions.values():
        for stmt in info.stmts:
            if isinstance(stmt, Eval):
                assert info.site(stmt) in program.bindings.eval_sites
            elif isinstance(stmt, AsmCall):
                assert info.site(stmt) in program.bindings.asm_sites


def test_no_binding_targets_host_from_asm(threehop_program):
    program = threehop_program
    for binding in program.bindings.asm_sites.values():
        assert binding.module in program.asm_modules
    for node in program.bindings.bridge_methods.values():
        assert node in program.functions  # callbacks land in host code only


def test_manifest_stem_mismatch(tmp_path):
    (tmp_path / "entry.poly").write_text("unit wrong;\nfunc main() { x = 0; return x; }\n")
    (tmp_path / "manifest.json").write_text(json.dumps({
        "entry": "entry.poly", "middle": [], "asm": [], "entry_function": "main",
    }))
    with pytest.raises(LinkError) as err:
        link(load_manifest(tmp_path / "manifest.json"))
    assert any("expected 'entry'" in m for m in err.value.diagnostics.messages())


def test_manifest_missing_key(tmp_path):
    (tmp_path / "manifest.json").write_text("{}")
    with pytest.raises(LinkError):
        load_manifest(tmp_path / "manifest.json")


def test_provenance_and_components(threehop_program):
    p = threehop_program
    assert p.provenance == {"entry": "entry", "mid": "middle", "cmod": "bottom"}
    assert p.component_order == ("entry", "mid", "cmod")
    assert p.entry_node.key == "entry/entry.main"


def test_statement_sites_are_stable_preorder(bridge_program):
    info = bridge_program.host_info(bridge_program.entry_node)
    sites = [info.site(s) for s in info.stmts]
    assert sites == [f"entry:main:{i}" for i in range(len(sites))]
    sweep = list(iter_statements(info.decl.body))
    assert sweep == info.stmts
