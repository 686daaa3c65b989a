"""trilang: static analysis for three-language polyglot programs.

The package links an entry unit, guest middle units, and abstract assembly
modules into one program, runs it (the dynamic oracle), and analyzes it with
a summary-based points-to and taint engine whose per-language passes exchange
boundary facts until a mutual fixed point. On top sit two call-graph modes,
differential re-analysis after edits, a seeded program generator, and
soundness/precision measurement over corpora.
"""

from .asmlang import AsmModule, check_asm, parse_asm, render_asm
from .callgraph import CallGraph, build_cha, build_onthefly, diff_graphs, trace_to_graph
from .dataflow import (
    AbstractObject, AnalysisResult, NonConvergenceError, UnknownVariableError,
    mutual_fixpoint, query_points_to, query_taint_flows,
)
from .diagnostics import Diagnostic, Diagnostics, LinkError, ParseError
from .generator import GenConfig, ProgramSources, gen_edit, generate, generate_sources
from .hostlang import HostUnit, check_host, parse_host, render_host
from .incremental import (
    DependencyGraph, Edit, EditError, IncrementalReport, apply_edit,
    build_dependency_graph, reanalyze,
)
from .interp import DynamicTrace, RunResult, run
from .linker import (
    BindingTable, Manifest, NodeId, PolyglotProgram, link, link_units,
    load_manifest, lookup_binding,
)
from .metrics import PrecisionReport, SuiteReport, measure_precision, soundness_suite
from .summaries import AccessPath, ExternalFacts, FunctionSummary, summarize_function

__version__ = "0.1.0"

__all__ = [
    "AbstractObject", "AccessPath", "AnalysisResult", "AsmModule", "BindingTable",
    "CallGraph", "DependencyGraph", "Diagnostic", "Diagnostics", "DynamicTrace",
    "Edit", "EditError", "ExternalFacts", "FunctionSummary", "GenConfig",
    "HostUnit", "IncrementalReport", "LinkError", "Manifest", "NodeId",
    "NonConvergenceError", "ParseError", "PolyglotProgram", "PrecisionReport",
    "ProgramSources", "RunResult", "SuiteReport", "UnknownVariableError",
    "apply_edit", "build_cha", "build_dependency_graph", "build_onthefly",
    "check_asm", "check_host", "diff_graphs", "gen_edit", "generate",
    "generate_sources", "link", "link_units", "load_manifest", "lookup_binding",
    "measure_precision", "mutual_fixpoint", "parse_asm", "parse_host",
    "query_points_to", "query_taint_flows", "reanalyze", "render_asm",
    "render_host", "run", "soundness_suite", "summarize_function",
    "trace_to_graph",
]
