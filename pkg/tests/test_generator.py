from __future__ import annotations

import pytest

from trilang.generator import GenConfig, gen_edit, generate, generate_sources
from trilang.incremental import apply_edit
from trilang.interp import run
from trilang.linker import link_units


def test_same_seed_gives_byte_identical_sources():
    a = generate_sources(GenConfig(seed=7))
    b = generate_sources(GenConfig(seed=7))
    assert a.files == b.files
    assert a.manifest == b.manifest


def test_different_seeds_differ():
    a = generate_sources(GenConfig(seed=0))
    b = generate_sources(GenConfig(seed=1))
    assert a.files != b.files


def test_seed_zero_links_cleanly():
    program = generate(GenConfig(seed=0))  # raises on any diagnostic
    assert program.bindings.eval_sites or program.bindings.asm_sites


@pytest.mark.parametrize("seed", range(0, 25))
def test_generated_programs_run_to_completion(seed):
    program = generate(GenConfig(seed=seed))
    result = run(program)
    assert result.outcome == "completed", result.fault


def test_zero_densities_mean_single_language():
    cfg = GenConfig(seed=4, eval_density=0.0, asmcall_density=0.0,
                    callback_density=0.0)
    program = generate(cfg)
    assert not program.bindings.eval_sites
    assert not program.bindings.asm_sites
    result = run(program)
    assert result.outcome == "completed"
    assert {e[3] for e in result.trace.call_edges} <= {"direct-virtual"}


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(seed=0, types_per_unit=0)
    with pytest.raises(ValueError):
        GenConfig(seed=0, eval_density=1.5)
    with pytest.raises(ValueError):
        GenConfig.from_dict({"seed": 0, "bogus_knob": 3})


def test_sources_write_and_relink(tmp_path):
    from trilang.linker import link, load_manifest

    sources = generate_sources(GenConfig(seed=3))
    manifest_path = sources.write(tmp_path)
    program = link(load_manifest(manifest_path))
    assert run(program).outcome == "completed"


def test_gen_edit_is_deterministic_and_checks():
    cfg = GenConfig(seed=11)
    program = generate(cfg)
    a = gen_edit(cfg, program)
    b = gen_edit(cfg, program)
    assert a == b
    apply_edit(program, a)  # must not raise


def test_gen_edit_single_function_program():
    entry = (
        "unit entry;\n\ntype T0 {\n  fields: f0;\n  methods: ;\n}\n\n"
        "func main() {\n  x = 1;\n  return x;\n}\n"
    )
    from trilang.hostlang import parse_host

    program = link_units(parse_host(entry), [], [], "main")
    edit = gen_edit(GenConfig(seed=0), program)
    assert edit.target == program.entry_node


def test_gen_edit_varies_with_seed():
    program = generate(GenConfig(seed=2))
    targets = {gen_edit(GenConfig(seed=s), program).target for s in range(8)}
    assert len(targets) > 1


def test_boundary_mechanisms_present_with_default_densities():
    mechanisms = set()
    for seed in range(10):
        trace = run(generate(GenConfig(seed=seed))).trace
        mechanisms |= {e[3] for e in trace.call_edges}
    assert {"eval", "asmcall", "bridge-callback", "direct-virtual"} <= mechanisms


def test_chain_depth_scales_with_middle_units():
    cfg = GenConfig(seed=6, middle_units=3, eval_density=1.0)
    program = generate(cfg)
    assert len(program.middles) == 3
    assert run(program).outcome == "completed"
