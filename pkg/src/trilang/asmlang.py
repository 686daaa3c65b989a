"""Abstract assembly language: syntax tree, parser, renderer, and checker.

A module owns named globals and a list of procedures; only `export`ed
procedures are callable from outside the module. Procedures have no
parameter lists: callers marshal arguments into the implicit globals
`arg0..argN`, and `ret l` publishes the result in the implicit global `ret0`
besides returning it. Values are integers only.

Concrete syntax (`#` starts a comment, `;` is ignored like whitespace)::

    module cmod {
      global g0
      export proc id {
        local l1
        l1 <- load arg0
        ret l1
      }
    }

Instructions are self-delimiting, so newlines are not significant. Branch
targets are labels written `name:` in front of an instruction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .diagnostics import Diagnostic, Diagnostics, ParseError

ASM_KEYWORDS = {
    "module", "global", "export", "proc", "local",
    "load", "store", "call", "ret", "br", "compare", "branchcond",
    "add", "sub", "mul", "const",
}

_RESERVED_GLOBAL = re.compile(r"^(arg\d+|ret0)$")

Loc = tuple[int, int]
_NOLOC: Loc = (0, 0)


def is_implicit_global(name: str) -> bool:
    """arg0..argN and ret0 exist in every module without declaration."""
    return bool(_RESERVED_GLOBAL.match(name))


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Instr:
    """Base class for instructions."""


@dataclass(frozen=True)
class Load(Instr):
    dest: str  # local
    src: str   # local or global


@dataclass(frozen=True)
class Store(Instr):
    dest: str  # local or global
    src: str   # local


@dataclass(frozen=True)
class Call(Instr):
    module: Optional[str]  # None for a same-module target
    proc: str


@dataclass(frozen=True)
class Ret(Instr):
    src: str  # local


@dataclass(frozen=True)
class Br(Instr):
    label: str


@dataclass(frozen=True)
class Compare(Instr):
    left: str
    right: str


@dataclass(frozen=True)
class BranchCond(Instr):
    label: str


@dataclass(frozen=True)
class Op(Instr):
    dest: str
    op: str  # add | sub | mul
    left: str
    right: str


@dataclass(frozen=True)
class Const(Instr):
    dest: str
    value: int


@dataclass(frozen=True)
class LabeledInstr:
    instr: Instr
    label: Optional[str] = None
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class Procedure:
    name: str
    exported: bool
    locals: tuple[str, ...]
    body: tuple[LabeledInstr, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class AsmModule:
    name: str
    globals: tuple[str, ...] = ()
    procedures: tuple[Procedure, ...] = ()

    def proc_map(self) -> dict[str, Procedure]:
        return {p.name: p for p in self.procedures}


# ---------------------------------------------------------------------------
# Lexer / parser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT, INT, KW, '{', '}', '<-', ':', '.', EOF
    value: str
    line: int
    col: int


def _lex(text: str, source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r;":
            i += 1
            col += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "KW" if word in ASM_KEYWORDS else "IDENT"
            tokens.append(_Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if text[i:i + 2] == "<-":
            tokens.append(_Token("<-", "<-", line, col))
            i += 2
            col += 2
            continue
        if ch in "{}:.":
            tokens.append(_Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(Diagnostic(f"unexpected character {ch!r}", line, col, source))
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str, source: str):
        self.tokens = _lex(text, source)
        self.pos = 0
        self.source = source

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: Optional[_Token] = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(Diagnostic(message, tok.line, tok.col, self.source))

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise self.fail(f"expected {kind!r}, found {tok.value!r}")
        return self.next()

    def expect_kw(self, word: str) -> _Token:
        tok = self.peek()
        if tok.kind != "KW" or tok.value != word:
            raise self.fail(f"expected {word!r}, found {tok.value!r}")
        return self.next()

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "KW" and tok.value == word

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind == "KW":
            raise self.fail(f"unknown mnemonic or misplaced keyword {tok.value!r}")
        if tok.kind != "IDENT":
            raise self.fail(f"expected identifier, found {tok.value!r}")
        self.next()
        return tok.value

    def module(self) -> AsmModule:
        self.expect_kw("module")
        name = self.ident()
        self.expect("{")
        globals_: list[str] = []
        procedures: list[Procedure] = []
        while self.peek().kind != "}":
            if self.at_kw("global"):
                self.next()
                globals_.append(self.ident())
            elif self.at_kw("export") or self.at_kw("proc"):
                procedures.append(self.procedure())
            else:
                raise self.fail(f"expected 'global', 'proc' or 'export', found {self.peek().value!r}")
        self.expect("}")
        return AsmModule(name, tuple(globals_), tuple(procedures))

    def procedure(self) -> Procedure:
        start = self.peek()
        exported = False
        if self.at_kw("export"):
            self.next()
            exported = True
        self.expect_kw("proc")
        name = self.ident()
        self.expect("{")
        locals_: list[str] = []
        while self.at_kw("local"):
            self.next()
            locals_.append(self.ident())
        body: list[LabeledInstr] = []
        while self.peek().kind != "}":
            if self.peek().kind == "EOF":
                raise self.fail("unterminated procedure body")
            body.append(self.labeled_instr())
        self.expect("}")
        return Procedure(name, exported, tuple(locals_), tuple(body),
                         loc=(start.line, start.col))

    def labeled_instr(self) -> LabeledInstr:
        label = None
        tok = self.peek()
        if tok.kind == "IDENT" and self.peek(1).kind == ":":
            label = self.ident()
            self.expect(":")
            tok = self.peek()
        loc = (tok.line, tok.col)
        return LabeledInstr(self.instr(), label, loc=loc)

    def instr(self) -> Instr:
        tok = self.peek()
        if tok.kind == "IDENT":
            dest = self.ident()
            self.expect("<-")
            mn = self.peek()
            if mn.kind != "KW":
                raise self.fail(f"unknown mnemonic {mn.value!r}")
            if mn.value == "load":
                self.next()
                return Load(dest, self.ident())
            if mn.value == "const":
                self.next()
                value = int(self.expect("INT").value)
                return Const(dest, value)
            if mn.value in ("add", "sub", "mul"):
                self.next()
                return Op(dest, mn.value, self.ident(), self.ident())
            raise self.fail(f"unknown mnemonic {mn.value!r}")
        if tok.kind != "KW":
            raise self.fail(f"unknown mnemonic {tok.value!r}")
        if tok.value == "store":
            self.next()
            return Store(self.ident(), self.ident())
        if tok.value == "call":
            self.next()
            first = self.ident()
            if self.peek().kind == ".":
                self.next()
                return Call(first, self.ident())
            return Call(None, first)
        if tok.value == "ret":
            self.next()
            return Ret(self.ident())
        if tok.value == "br":
            self.next()
            return Br(self.ident())
        if tok.value == "compare":
            self.next()
            return Compare(self.ident(), self.ident())
        if tok.value == "branchcond":
            self.next()
            return BranchCond(self.ident())
        raise self.fail(f"unknown mnemonic {tok.value!r}")


def parse_asm(text: str, source: str = "") -> AsmModule:
    """Parse one module. Raises ParseError with line/column on bad input."""
    parser = _Parser(text, source)
    module = parser.module()
    if parser.peek().kind != "EOF":
        raise parser.fail(f"trailing input after module: {parser.peek().value!r}")
    return module


def parse_proc_body(text: str, source: str = "<body>") -> tuple[tuple[str, ...], tuple[LabeledInstr, ...]]:
    """Parse `{ local... instrs... }` on its own; used for procedure edits."""
    parser = _Parser(text, source)
    parser.expect("{")
    locals_: list[str] = []
    while parser.at_kw("local"):
        parser.next()
        locals_.append(parser.ident())
    body: list[LabeledInstr] = []
    while parser.peek().kind != "}":
        if parser.peek().kind == "EOF":
            raise parser.fail("unterminated body")
        body.append(parser.labeled_instr())
    parser.expect("}")
    if parser.peek().kind != "EOF":
        raise parser.fail(f"trailing input after body: {parser.peek().value!r}")
    return tuple(locals_), tuple(body)


# ---------------------------------------------------------------------------
# Renderer
# ---------------------------------------------------------------------------

def _render_instr(li: LabeledInstr) -> str:
    i = li.instr
    if isinstance(i, Load):
        text = f"{i.dest} <- load {i.src}"
    elif isinstance(i, Store):
        text = f"store {i.dest} {i.src}"
    elif isinstance(i, Call):
        text = f"call {i.module}.{i.proc}" if i.module else f"call {i.proc}"
    elif isinstance(i, Ret):
        text = f"ret {i.src}"
    elif isinstance(i, Br):
        text = f"br {i.label}"
    elif isinstance(i, Compare):
        text = f"compare {i.left} {i.right}"
    elif isinstance(i, BranchCond):
        text = f"branchcond {i.label}"
    elif isinstance(i, Op):
        text = f"{i.dest} <- {i.op} {i.left} {i.right}"
    elif isinstance(i, Const):
        text = f"{i.dest} <- const {i.value}"
    else:  # pragma: no cover
        raise TypeError(f"unrenderable instruction {i!r}")
    return f"{li.label}: {text}" if li.label else text


def render_asm(module: AsmModule) -> str:
    """Canonical text for a module; parse_asm(render_asm(m)) == m."""
    out = [f"module {module.name} {{"]
    for g in module.globals:
        out.append(f"  global {g}")
    for p in module.procedures:
        head = "export proc" if p.exported else "proc"
        out.append(f"  {head} {p.name} {{")
        for l in p.locals:
            out.append(f"    local {l}")
        for li in p.body:
            out.append(f"    {_render_instr(li)}")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Checker
# ---------------------------------------------------------------------------

def check_asm(module: AsmModule) -> Diagnostics:
    """Module-local well-formedness: declarations, labels, operand classes.

    Cross-module call targets (existence, export) need the peer modules and
    are validated by the linker.
    """
    diags = Diagnostics()
    seen_globals: set[str] = set()
    for g in module.globals:
        if is_implicit_global(g):
            diags.add(f"global '{g}' redeclares a reserved implicit global")
        if g in seen_globals:
            diags.add(f"duplicate global '{g}' in module '{module.name}'")
        seen_globals.add(g)
    proc_names: set[str] = set()
    for p in module.procedures:
        if p.name in proc_names:
            diags.add(f"duplicate procedure '{p.name}' in module '{module.name}'", *p.loc)
        proc_names.add(p.name)
    globals_all = seen_globals
    for p in module.procedures:
        _check_procedure(module, p, globals_all, proc_names, diags)
    return diags


def _check_procedure(module: AsmModule, proc: Procedure, globals_: set[str],
                     proc_names: set[str], diags: Diagnostics) -> None:
    locals_: set[str] = set()
    for l in proc.locals:
        if is_implicit_global(l):
            diags.add(f"local '{l}' shadows a reserved implicit global", *proc.loc)
        if l in locals_:
            diags.add(f"duplicate local '{l}' in proc '{proc.name}'", *proc.loc)
        if l in globals_:
            diags.add(f"local '{l}' shadows a module global", *proc.loc)
        locals_.add(l)

    labels: set[str] = set()
    for li in proc.body:
        if li.label is not None:
            if li.label in labels:
                diags.add(f"duplicate label '{li.label}' in proc '{proc.name}'", *li.loc)
            labels.add(li.label)

    def need_local(name: str, li: LabeledInstr) -> None:
        if name not in locals_:
            diags.add(f"use of undeclared local '{name}' in proc '{proc.name}'", *li.loc)

    def need_slot(name: str, li: LabeledInstr) -> None:
        if name not in locals_ and name not in globals_ and not is_implicit_global(name):
            diags.add(f"undeclared name '{name}' in proc '{proc.name}'", *li.loc)

    for li in proc.body:
        i = li.instr
        if isinstance(i, Load):
            need_local(i.dest, li)
            need_slot(i.src, li)
        elif isinstance(i, Store):
            need_slot(i.dest, li)
            need_local(i.src, li)
        elif isinstance(i, (Ret,)):
            need_local(i.src, li)
        elif isinstance(i, Compare):
            need_local(i.left, li)
            need_local(i.right, li)
        elif isinstance(i, Op):
            need_local(i.dest, li)
            need_local(i.left, li)
            need_local(i.right, li)
        elif isinstance(i, Const):
            need_local(i.dest, li)
        elif isinstance(i, (Br, BranchCond)):
            if i.label not in labels:
                diags.add(f"unresolved label '{i.label}' in proc '{proc.name}'", *li.loc)
        elif isinstance(i, Call):
            if i.module is None or i.module == module.name:
                if i.proc not in proc_names:
                    diags.add(
                        f"call to unknown procedure '{i.proc}' in module '{module.name}'",
                        *li.loc,
                    )


def arg_usage(module: AsmModule, proc_name: str) -> int:
    """Highest argN index read by `proc_name` or same-module procedures it can
    reach through `call`; -1 when no arg global is read."""
    procs = module.proc_map()
    seen: set[str] = set()
    frontier = [proc_name]
    highest = -1
    while frontier:
        name = frontier.pop()
        if name in seen or name not in procs:
            continue
        seen.add(name)
        for li in procs[name].body:
            i = li.instr
            if isinstance(i, Load) and i.src.startswith("arg") and is_implicit_global(i.src):
                highest = max(highest, int(i.src[3:]))
            elif isinstance(i, Call) and (i.module is None or i.module == module.name):
                frontier.append(i.proc)
    return highest
