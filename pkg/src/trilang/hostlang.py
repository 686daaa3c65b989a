"""Host/middle language: syntax tree, parser, renderer, and checker.

A source file holds one `unit`. A unit declares object types (field sets plus
a method table mapping method names to functions of the same unit) and
functions. Function bodies are statement lists; the boundary constructs are
`eval(unit.fn, [bridges...])`, which runs a guest-unit function with the
listed bridge objects exposed as free names, and `v = asmcall(mod.proc, ...)`,
which enters an assembly module. `bridge i = new T();` allocates an object in
the bridge namespace; only bridge names may be exposed at eval sites.

Concrete syntax sketch::

    unit entry;

    type Box {
      fields: val, out;
      methods: get -> box_get;
    }

    func main() {
      x = source();
      bridge b = new Box();
      b.val = x;
      eval(mid.go, [b]);
      z = b.out;
      sink(z);
      return z;
    }

Statements are `;`-terminated, blocks use braces. There is no plain copy
assignment; values move through fields, calls, and returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .diagnostics import Diagnostic, Diagnostics, ParseError

KEYWORDS = {
    "unit", "type", "func", "bridge", "new", "return", "if", "else",
    "while", "eval", "asmcall", "source", "sink",
}

OPS = ("add", "sub", "mul")
_OP_SYMBOL = {"add": "+", "sub": "-", "mul": "*"}
_SYMBOL_OP = {v: k for k, v in _OP_SYMBOL.items()}
_REL_SYMBOL = {"eq": "==", "ne": "!=", "lt": "<"}
_SYMBOL_REL = {v: k for k, v in _REL_SYMBOL.items()}

Loc = tuple[int, int]
_NOLOC: Loc = (0, 0)


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cond:
    """Branch condition `lhs rel rhs`; rhs is a variable name or int literal."""

    lhs: str
    rel: str  # eq | ne | lt
    rhs: Union[str, int]


@dataclass(frozen=True)
class Stmt:
    """Base class for statements; subclasses carry a compare-excluded loc."""


@dataclass(frozen=True)
class Alloc(Stmt):
    target: str
    type_name: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class BridgeAlloc(Stmt):
    target: str
    type_name: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class Return(Stmt):
    var: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class MethodCall(Stmt):
    target: str
    receiver: str
    method: str
    args: tuple[str, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class FieldLoad(Stmt):
    target: str
    receiver: str
    field_name: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class FieldStore(Stmt):
    receiver: str
    field_name: str
    value: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class If(Stmt):
    cond: Cond
    then: tuple[Stmt, ...]
    orelse: tuple[Stmt, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class While(Stmt):
    cond: Cond
    body: tuple[Stmt, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class BinOp(Stmt):
    target: str
    op: str  # add | sub | mul
    left: str
    right: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class ConstAssign(Stmt):
    target: str
    value: int
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class Eval(Stmt):
    unit: str
    function: str
    exposed: tuple[str, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class AsmCall(Stmt):
    target: str
    module: str
    proc: str
    args: tuple[str, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class SourceAssign(Stmt):
    target: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class SinkCall(Stmt):
    var: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class TypeDecl:
    name: str
    fields: tuple[str, ...]
    methods: tuple[tuple[str, str], ...]  # (method name, function name)
    loc: Loc = field(default=_NOLOC, compare=False)

    def method_map(self) -> dict[str, str]:
        return dict(self.methods)


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class HostUnit:
    name: str
    types: tuple[TypeDecl, ...] = ()
    functions: tuple[FunctionDecl, ...] = ()

    def type_map(self) -> dict[str, TypeDecl]:
        return {t.name: t for t in self.types}

    def function_map(self) -> dict[str, FunctionDecl]:
        return {f.name: f for f in self.functions}


# ---------------------------------------------------------------------------
# Statement traversal helpers (shared with linker, interpreter, analysis)
# ---------------------------------------------------------------------------

def iter_statements(body: tuple[Stmt, ...]) -> Iterator[Stmt]:
    """Pre-order walk over a statement list, descending into blocks."""
    for stmt in body:
        yield stmt
        if isinstance(stmt, If):
            yield from iter_statements(stmt.then)
            yield from iter_statements(stmt.orelse)
        elif isinstance(stmt, While):
            yield from iter_statements(stmt.body)


def stmt_target(stmt: Stmt) -> Optional[str]:
    """The variable the statement assigns, if any."""
    if isinstance(stmt, (Alloc, BridgeAlloc, MethodCall, FieldLoad, BinOp,
                         ConstAssign, AsmCall, SourceAssign)):
        return stmt.target
    return None


def stmt_reads(stmt: Stmt) -> tuple[str, ...]:
    """Variable names the statement reads (conditions included)."""
    if isinstance(stmt, Return):
        return (stmt.var,)
    if isinstance(stmt, MethodCall):
        return (stmt.receiver,) + stmt.args
    if isinstance(stmt, FieldLoad):
        return (stmt.receiver,)
    if isinstance(stmt, FieldStore):
        return (stmt.receiver, stmt.value)
    if isinstance(stmt, (If, While)):
        cond = stmt.cond
        reads = [cond.lhs]
        if isinstance(cond.rhs, str):
            reads.append(cond.rhs)
        return tuple(reads)
    if isinstance(stmt, BinOp):
        return (stmt.left, stmt.right)
    if isinstance(stmt, Eval):
        return stmt.exposed
    if isinstance(stmt, AsmCall):
        return stmt.args
    if isinstance(stmt, SinkCall):
        return (stmt.var,)
    return ()


def bridge_declared(fn: FunctionDecl) -> set[str]:
    """Names introduced by `bridge x = new T()` anywhere in the function."""
    return {s.target for s in iter_statements(fn.body) if isinstance(s, BridgeAlloc)}


def assigned_names(fn: FunctionDecl) -> set[str]:
    """All assignment targets in the function, bridge targets included."""
    out = set()
    for s in iter_statements(fn.body):
        t = stmt_target(s)
        if t is not None:
            out.add(t)
    return out


def free_names(fn: FunctionDecl) -> set[str]:
    """Names read but never assigned and not parameters.

    These resolve against the bridge environment of the current activation;
    the linker decides whether some eval site can justify them.
    """
    bound = assigned_names(fn) | set(fn.params)
    reads = set()
    for s in iter_statements(fn.body):
        reads.update(stmt_reads(s))
    return reads - bound


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_PUNCT = ("==", "!=", "->", "{", "}", "(", ")", "[", "]", ";", ",", "=", ".",
          "<", "+", "-", "*", ":")


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT, INT, KW, punct literal, EOF
    value: str
    line: int
    col: int


def _lex(text: str, source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "KW" if word in KEYWORDS else "IDENT"
            tokens.append(_Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        two = text[i:i + 2]
        if two in _PUNCT:
            tokens.append(_Token(two, two, line, col))
            i += 2
            col += 2
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(Diagnostic(f"unexpected character {ch!r}", line, col, source))
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, source: str):
        self.tokens = _lex(text, source)
        self.pos = 0
        self.source = source

    # -- token plumbing ----------------------------------------------------

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
            raise self.fail(f"expected keyword {word!r}, found {tok.value!r}")
        return self.next()

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind == "KW":
            raise self.fail(f"reserved word {tok.value!r} may not be used as an identifier")
        if tok.kind != "IDENT":
            raise self.fail(f"expected identifier, found {tok.value!r}")
        self.next()
        return tok.value

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "KW" and tok.value == word

    # -- grammar -----------------------------------------------------------

    def unit(self) -> HostUnit:
        self.expect_kw("unit")
        name = self.ident()
        self.expect(";")
        types: list[TypeDecl] = []
        functions: list[FunctionDecl] = []
        while not self.peek().kind == "EOF":
            if self.at_kw("type"):
                types.append(self.type_decl())
            elif self.at_kw("func"):
                functions.append(self.function_decl())
            else:
                raise self.fail(f"expected 'type' or 'func', found {self.peek().value!r}")
        return HostUnit(name, tuple(types), tuple(functions))

    def type_decl(self) -> TypeDecl:
        start = self.expect_kw("type")
        name = self.ident()
        self.expect("{")
        fields = self._clause("fields", self._field_list)
        methods = self._clause("methods", self._method_list)
        self.expect("}")
        return TypeDecl(name, tuple(fields), tuple(methods), loc=(start.line, start.col))

    def _clause(self, label: str, parse_items):
        tok = self.peek()
        if tok.kind != "IDENT" or tok.value != label:
            raise self.fail(f"expected {label!r} clause")
        self.next()
        self.expect(":")
        items = parse_items()
        if self.peek().kind == ";":
            self.next()
        return items

    def _field_list(self) -> list[str]:
        items: list[str] = []
        while self.peek().kind == "IDENT" and self.peek().value != "methods":
            items.append(self.ident())
            if self.peek().kind == ",":
                self.next()
            else:
                break
        return items

    def _method_list(self) -> list[tuple[str, str]]:
        items: list[tuple[str, str]] = []
        while self.peek().kind == "IDENT":
            method = self.ident()
            self.expect("->")
            target = self.ident()
            items.append((method, target))
            if self.peek().kind == ",":
                self.next()
            else:
                break
        return items

    def function_decl(self) -> FunctionDecl:
        start = self.expect_kw("func")
        name = self.ident()
        self.expect("(")
        params: list[str] = []
        if self.peek().kind == "IDENT":
            params.append(self.ident())
            while self.peek().kind == ",":
                self.next()
                params.append(self.ident())
        self.expect(")")
        body = self.block()
        return FunctionDecl(name, tuple(params), body, loc=(start.line, start.col))

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        stmts: list[Stmt] = []
        while self.peek().kind != "}":
            if self.peek().kind == "EOF":
                raise self.fail("unterminated block")
            stmts.append(self.statement())
        self.expect("}")
        return tuple(stmts)

    def statement(self) -> Stmt:
        tok = self.peek()
        loc = (tok.line, tok.col)
        if self.at_kw("bridge"):
            self.next()
            target = self.ident()
            self.expect("=")
            self.expect_kw("new")
            type_name = self.ident()
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return BridgeAlloc(target, type_name, loc=loc)
        if self.at_kw("return"):
            self.next()
            var = self.ident()
            self.expect(";")
            return Return(var, loc=loc)
        if self.at_kw("if"):
            self.next()
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            then = self.block()
            orelse: tuple[Stmt, ...] = ()
            if self.at_kw("else"):
                self.next()
                orelse = self.block()
            return If(cond, then, orelse, loc=loc)
        if self.at_kw("while"):
            self.next()
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            body = self.block()
            return While(cond, body, loc=loc)
        if self.at_kw("eval"):
            self.next()
            self.expect("(")
            unit = self.ident()
            self.expect(".")
            function = self.ident()
            exposed: list[str] = []
            if self.peek().kind == ",":
                self.next()
                self.expect("[")
                while self.peek().kind == "IDENT":
                    exposed.append(self.ident())
                    if self.peek().kind == ",":
                        self.next()
                self.expect("]")
            self.expect(")")
            self.expect(";")
            return Eval(unit, function, tuple(exposed), loc=loc)
        if self.at_kw("sink"):
            self.next()
            self.expect("(")
            var = self.ident()
            self.expect(")")
            self.expect(";")
            return SinkCall(var, loc=loc)
        if tok.kind == "IDENT":
            # Either `x.f = y;` or an assignment `x = ...;`.
            if self.peek(1).kind == ".":
                receiver = self.ident()
                self.expect(".")
                fname = self.ident()
                self.expect("=")
                value = self.ident()
                self.expect(";")
                return FieldStore(receiver, fname, value, loc=loc)
            target = self.ident()
            self.expect("=")
            return self.assignment_rhs(target, loc)
        raise self.fail(f"statement may not start with {tok.value!r}")

    def assignment_rhs(self, target: str, loc: Loc) -> Stmt:
        tok = self.peek()
        if self.at_kw("new"):
            self.next()
            type_name = self.ident()
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return Alloc(target, type_name, loc=loc)
        if self.at_kw("source"):
            self.next()
            self.expect("(")
            self.expect(")")
            self.expect(";")
            return SourceAssign(target, loc=loc)
        if self.at_kw("asmcall"):
            self.next()
            self.expect("(")
            module = self.ident()
            self.expect(".")
            proc = self.ident()
            args: list[str] = []
            while self.peek().kind == ",":
                self.next()
                args.append(self.ident())
            self.expect(")")
            self.expect(";")
            return AsmCall(target, module, proc, tuple(args), loc=loc)
        if tok.kind == "INT" or tok.kind == "-":
            value = self.int_literal()
            self.expect(";")
            return ConstAssign(target, value, loc=loc)
        if tok.kind == "IDENT":
            first = self.ident()
            nxt = self.peek()
            if nxt.kind == ".":
                self.next()
                member = self.ident()
                if self.peek().kind == "(":
                    self.next()
                    args = []
                    while self.peek().kind == "IDENT":
                        args.append(self.ident())
                        if self.peek().kind == ",":
                            self.next()
                    self.expect(")")
                    self.expect(";")
                    return MethodCall(target, first, member, tuple(args), loc=loc)
                self.expect(";")
                return FieldLoad(target, first, member, loc=loc)
            if nxt.kind in ("+", "-", "*"):
                self.next()
                right = self.ident()
                self.expect(";")
                return BinOp(target, _SYMBOL_OP[nxt.kind], first, right, loc=loc)
            raise self.fail(
                "plain copy assignment is not part of the language; "
                "use a field, call, or operation"
            )
        raise self.fail(f"cannot parse assignment starting at {tok.value!r}")

    def int_literal(self) -> int:
        negative = False
        if self.peek().kind == "-":
            self.next()
            negative = True
        tok = self.expect("INT")
        value = int(tok.value)
        return -value if negative else value

    def cond(self) -> Cond:
        lhs = self.ident()
        tok = self.peek()
        if tok.kind not in _SYMBOL_REL:
            raise self.fail(f"expected comparison, found {tok.value!r}")
        self.next()
        rhs: Union[str, int]
        if self.peek().kind in ("INT", "-"):
            rhs = self.int_literal()
        else:
            rhs = self.ident()
        return Cond(lhs, _SYMBOL_REL[tok.kind], rhs)


def parse_host(text: str, source: str = "") -> HostUnit:
    """Parse one unit. Raises ParseError with line/column on bad input."""
    parser = _Parser(text, source)
    unit = parser.unit()
    return unit


def parse_block(text: str, source: str = "<block>") -> tuple[Stmt, ...]:
    """Parse a braced statement block on its own; used for function-body edits."""
    parser = _Parser(text, source)
    body = parser.block()
    if parser.peek().kind != "EOF":
        raise parser.fail(f"trailing input after block: {parser.peek().value!r}")
    return body


# ---------------------------------------------------------------------------
# Renderer
# ---------------------------------------------------------------------------

def _render_cond(cond: Cond) -> str:
    return f"{cond.lhs} {_REL_SYMBOL[cond.rel]} {cond.rhs}"


def _render_stmt(stmt: Stmt, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(stmt, Alloc):
        out.append(f"{pad}{stmt.target} = new {stmt.type_name}();")
    elif isinstance(stmt, BridgeAlloc):
        out.append(f"{pad}bridge {stmt.target} = new {stmt.type_name}();")
    elif isinstance(stmt, Return):
        out.append(f"{pad}return {stmt.var};")
    elif isinstance(stmt, MethodCall):
        out.append(f"{pad}{stmt.target} = {stmt.receiver}.{stmt.method}({', '.join(stmt.args)});")
    elif isinstance(stmt, FieldLoad):
        out.append(f"{pad}{stmt.target} = {stmt.receiver}.{stmt.field_name};")
    elif isinstance(stmt, FieldStore):
        out.append(f"{pad}{stmt.receiver}.{stmt.field_name} = {stmt.value};")
    elif isinstance(stmt, If):
        out.append(f"{pad}if ({_render_cond(stmt.cond)}) {{")
        for s in stmt.then:
            _render_stmt(s, indent + 1, out)
        if stmt.orelse:
            out.append(f"{pad}}} else {{")
            for s in stmt.orelse:
                _render_stmt(s, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(stmt, While):
        out.append(f"{pad}while ({_render_cond(stmt.cond)}) {{")
        for s in stmt.body:
            _render_stmt(s, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(stmt, BinOp):
        out.append(f"{pad}{stmt.target} = {stmt.left} {_OP_SYMBOL[stmt.op]} {stmt.right};")
    elif isinstance(stmt, ConstAssign):
        out.append(f"{pad}{stmt.target} = {stmt.value};")
    elif isinstance(stmt, Eval):
        out.append(f"{pad}eval({stmt.unit}.{stmt.function}, [{', '.join(stmt.exposed)}]);")
    elif isinstance(stmt, AsmCall):
        args = "".join(f", {a}" for a in stmt.args)
        out.append(f"{pad}{stmt.target} = asmcall({stmt.module}.{stmt.proc}{args});")
    elif isinstance(stmt, SourceAssign):
        out.append(f"{pad}{stmt.target} = source();")
    elif isinstance(stmt, SinkCall):
        out.append(f"{pad}sink({stmt.var});")
    else:  # pragma: no cover - exhaustive over Stmt subclasses
        raise TypeError(f"unrenderable statement {stmt!r}")


def render_host(unit: HostUnit) -> str:
    """Canonical text for a unit; parse_host(render_host(u)) == u."""
    out = [f"unit {unit.name};"]
    for t in unit.types:
        out.append("")
        out.append(f"type {t.name} {{")
        out.append(f"  fields: {', '.join(t.fields)};" if t.fields else "  fields: ;")
        if t.methods:
            pairs = ", ".join(f"{m} -> {f}" for m, f in t.methods)
            out.append(f"  methods: {pairs};")
        else:
            out.append("  methods: ;")
        out.append("}")
    for f in unit.functions:
        out.append("")
        out.append(f"func {f.name}({', '.join(f.params)}) {{")
        for s in f.body:
            _render_stmt(s, 1, out)
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Checker
# ---------------------------------------------------------------------------

def check_host(unit: HostUnit) -> Diagnostics:
    """Well-formedness diagnostics for one unit in isolation.

    Free names (read, never assigned, not a parameter) are not flagged here:
    they are bridge reads whose justification depends on the whole program and
    is the linker's job. Everything decidable unit-locally is flagged.
    """
    diags = Diagnostics()
    type_names = [t.name for t in unit.types]
    for name in _duplicates(type_names):
        diags.add(f"duplicate type name '{name}' in unit '{unit.name}'")
    fn_names = [f.name for f in unit.functions]
    for name in _duplicates(fn_names):
        diags.add(f"duplicate function name '{name}' in unit '{unit.name}'")
    functions = unit.function_map()
    declared_types = set(type_names)

    for t in unit.types:
        for name in _duplicates(list(t.fields)):
            diags.add(f"duplicate field '{name}' in type '{t.name}'", *t.loc)
        for name in _duplicates([m for m, _ in t.methods]):
            diags.add(f"duplicate method '{name}' in type '{t.name}'", *t.loc)
        for method, target in t.methods:
            target_fn = functions.get(target)
            if target_fn is None:
                diags.add(
                    f"method '{t.name}.{method}' maps to missing function '{target}'",
                    *t.loc,
                )
            elif not target_fn.params:
                diags.add(
                    f"method '{t.name}.{method}' maps to '{target}', which takes no "
                    "parameters and cannot receive the receiver",
                    *t.loc,
                )

    for fn in unit.functions:
        _check_function(unit, fn, declared_types, diags)
    return diags


def _check_function(unit: HostUnit, fn: FunctionDecl, declared_types: set[str],
                    diags: Diagnostics) -> None:
    for name in _duplicates(list(fn.params)):
        diags.add(f"duplicate parameter '{name}' in function '{fn.name}'", *fn.loc)

    bridges = bridge_declared(fn)
    plain: set[str] = set()
    for s in iter_statements(fn.body):
        t = stmt_target(s)
        if t is not None and not isinstance(s, BridgeAlloc):
            plain.add(t)
    for name in sorted(bridges & plain):
        diags.add(
            f"name '{name}' is used both as a bridge variable and an ordinary "
            f"variable in function '{fn.name}'", *fn.loc,
        )
    for name in sorted(bridges & set(fn.params)):
        diags.add(
            f"parameter '{name}' shadowed by a bridge declaration in function "
            f"'{fn.name}'", *fn.loc,
        )

    local = bridges | plain | set(fn.params)

    def walk(body: tuple[Stmt, ...], assigned: set[str]) -> set[str]:
        for stmt in body:
            for name in stmt_reads(stmt):
                if name in assigned:
                    continue
                if name in local:
                    diags.add(
                        f"variable '{name}' may be read before assignment in "
                        f"function '{fn.name}'", *getattr(stmt, "loc", _NOLOC),
                    )
                # Otherwise a free name: a bridge read resolved per activation.
            if isinstance(stmt, Eval):
                for name in stmt.exposed:
                    if name not in bridges or name not in assigned:
                        diags.add(f"undeclared bridge variable {name}",
                                  *getattr(stmt, "loc", _NOLOC))
            if isinstance(stmt, (Alloc, BridgeAlloc)) and stmt.type_name not in declared_types:
                diags.add(
                    f"unknown type '{stmt.type_name}' in unit '{unit.name}'",
                    *getattr(stmt, "loc", _NOLOC),
                )
            if isinstance(stmt, If):
                after_then = walk(stmt.then, set(assigned))
                after_else = walk(stmt.orelse, set(assigned))
                assigned |= after_then & after_else
            elif isinstance(stmt, While):
                walk(stmt.body, set(assigned))
            t = stmt_target(stmt)
            if t is not None:
                assigned.add(t)
        return assigned

    walk(fn.body, set(fn.params))


def _duplicates(names: list[str]) -> list[str]:
    seen: set[str] = set()
    dups: list[str] = []
    for n in names:
        if n in seen and n not in dups:
            dups.append(n)
        seen.add(n)
    return dups
