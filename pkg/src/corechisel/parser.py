"""Lexer, recursive-descent parser and static validator for Core Chisel."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import ast as A

KEYWORDS = frozenset({
    "module", "state", "when", "goto", "int", "instream", "outstream",
    "Mux", "val", "Module", "read", "write", "ready", "valid",
})

# Stable diagnostic codes.
LEX = "lex"
SYNTAX = "syntax"
DUPLICATE = "duplicate-name"
UNRESOLVED = "unresolved-ref"
KIND = "kind-mismatch"
NO_INITIAL = "no-initial-state"
MEM_ACCESS = "mem-access"            # V1
STREAM_CONNECTION = "stream-connection"  # V2
COMM_GUARD = "comm-guard"            # V3
DUP_TARGET = "dup-target"            # V4
GOTO_TARGET = "goto-target"          # V5

ERROR = "error"
WARNING = "warning"

_DEFAULT_LOC = A.Loc(1, 1)


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    location: A.Loc
    code: str

    def render(self, filename: str = "<input>") -> str:
        loc = self.location
        return f"{filename}:{loc.line}:{loc.column}: {self.severity}[{self.code}]: {self.message}"


@dataclass
class ParseResult:
    program: Optional[A.Program]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == ERROR]

    @property
    def ok(self) -> bool:
        return self.program is not None


class ParseError(Exception):
    """Raised by :func:`parse` when the source has errors."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(d.render() for d in diagnostics))


# -- lexer ---------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<number>[0-9]+)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op><>|<=|>=|==|!=|[-+*/%<>=&|()\[\],.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "keyword", "number", "op", "eof"
    text: str
    loc: A.Loc


def tokenize(source: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    line, line_start, pos = 1, 0, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            ch = source[pos]
            diags.append(Diagnostic(ERROR, f"unexpected character {ch!r}", A.Loc(line, col), LEX))
            pos += 1
            continue
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            tokens.append(Token("keyword" if text in KEYWORDS else "ident", text, A.Loc(line, col)))
        elif kind in ("number", "op"):
            tokens.append(Token(kind, text, A.Loc(line, col)))
        pos = m.end()
    tokens.append(Token("eof", "", A.Loc(line, pos - line_start + 1)))
    return tokens, diags


# -- parser --------------------------------------------------------------------


class _Fail(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.diags: list[Diagnostic] = []

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("keyword", "op") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, expected: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        if tok.kind == "keyword" and expected == "identifier":
            msg = f"reserved word {tok.text!r} cannot be used as an identifier"
        else:
            msg = f"expected {expected}, found {_describe(tok)}"
        raise _Fail(Diagnostic(ERROR, msg, tok.loc, SYNTAX))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.fail("identifier")
        return self.advance()

    def number(self) -> Token:
        if self.tok.kind != "number":
            self.fail("number")
        return self.advance()

    def skip_to(self, *stops: str) -> None:
        while self.tok.kind != "eof" and not any(self.at(s) for s in stops):
            self.advance()

    # program ::= module+ connection* module-decl+
    def program(self) -> Optional[A.Program]:
        instances: list[A.ModuleInstance] = []
        connections: list[A.Connection] = []
        decls: list[A.ModuleDecl] = []
        start = self.tok.loc
        while self.tok.kind != "eof":
            try:
                if self.at("val"):
                    if connections or decls:
                        self.fail("connection or module declaration ('val' must come first)")
                    instances.append(self.instance())
                elif self.tok.kind == "ident":
                    if not instances:
                        self.fail("'val'")
                    if decls:
                        self.fail("'module' (connections must precede module declarations)")
                    connections.append(self.connection())
                elif self.at("module"):
                    if not instances:
                        self.fail("'val'")
                    decls.append(self.module_decl())
                else:
                    self.fail("'val', connection or 'module'")
            except _Fail as f:
                self.diags.append(f.diag)
                self.advance()
                self.skip_to("val", "module")
        if not instances and not self.diags:
            self.diags.append(Diagnostic(ERROR, "expected at least one module instance ('val')", start, SYNTAX))
        if self.diags:
            return None
        return A.Program(tuple(instances), tuple(connections), tuple(decls), loc=start)

    def instance(self) -> A.ModuleInstance:
        kw = self.expect("val")
        name = self.ident()
        self.expect("=")
        self.expect("Module")
        self.expect("(")
        decl = self.ident()
        self.expect(")")
        return A.ModuleInstance(name.text, decl.text, loc=kw.loc)

    def connection(self) -> A.Connection:
        a = self.ident()
        self.expect(".")
        s1 = self.ident()
        self.expect("<>")
        b = self.ident()
        self.expect(".")
        s2 = self.ident()
        return A.Connection(a.text, s1.text, b.text, s2.text, loc=a.loc)

    def module_decl(self) -> A.ModuleDecl:
        kw = self.expect("module")
        name = self.ident()
        decls: list[A.Declaration] = []
        states: list[A.StateDecl] = []
        while self.at("int") or self.at("instream") or self.at("outstream"):
            try:
                decls.append(self.declaration())
            except _Fail as f:
                self.diags.append(f.diag)
                self.advance()
                self.skip_to("int", "instream", "outstream", "state", "module", "val")
        if not self.at("state"):
            self.fail("'state'")
        while self.at("state"):
            try:
                states.append(self.state())
            except _Fail as f:
                # resync at the next state or module
                self.diags.append(f.diag)
                self.advance()
                self.skip_to("state", "module", "val")
        return A.ModuleDecl(name.text, tuple(decls), tuple(states), loc=kw.loc)

    def declaration(self) -> A.Declaration:
        t = self.advance()
        if t.text == "instream":
            return A.InStream(self.ident().text, loc=t.loc)
        if t.text == "outstream":
            return A.OutStream(self.ident().text, loc=t.loc)
        if self.at("["):
            self.advance()
            size = int(self.number().text)
            self.expect("]")
            return A.MemBank(self.ident().text, size, loc=t.loc)
        name = self.ident()
        initial = 0
        if self.at("="):
            self.advance()
            negative = False
            if self.at("-"):
                self.advance()
                negative = True
            initial = int(self.number().text)
            if negative:
                initial = -initial
        return A.IntReg(name.text, initial, loc=t.loc)

    def state(self) -> A.StateDecl:
        kw = self.expect("state")
        number = int(self.number().text)
        guard = None
        if self.at("when"):
            self.advance()
            guard = self.expr()
        stmts: list[A.Statement] = []
        while not self.at("goto"):
            if self.tok.kind != "ident":
                self.fail("statement or 'goto'")
            stmts.append(self.statement())
        self.expect("goto")
        goto = self.goto_expr()
        return A.StateDecl(number, guard, tuple(stmts), goto, loc=kw.loc)

    def statement(self) -> A.Statement:
        first = self.ident()
        if self.at("["):
            self.advance()
            index = self.expr()
            self.expect("]")
            self.expect("=")
            return A.MemWrite(first.text, index, self.expr(), loc=first.loc)
        if self.at("."):
            self.advance()
            self.expect("write")
            self.expect("(")
            value = self.expr()
            self.expect(")")
            return A.ChannelWrite(first.text, value, loc=first.loc)
        self.expect("=")
        if self.tok.kind == "ident":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "[":
                bank = self.advance()
                self.advance()
                index = self.expr()
                self.expect("]")
                return A.MemRead(first.text, bank.text, index, loc=first.loc)
            if nxt.kind == "op" and nxt.text == "." and self.peek(2).text == "read":
                stream = self.advance()
                self.advance()
                self.advance()
                self.expect("(")
                self.expect(")")
                return A.ChannelRead(first.text, stream.text, loc=first.loc)
        return A.Assign(first.text, self.expr(), loc=first.loc)

    def goto_expr(self) -> A.GotoExpr:
        if self.at("Mux"):
            kw = self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(",")
            a = self.goto_expr()
            self.expect(",")
            b = self.goto_expr()
            self.expect(")")
            return A.MuxGoto(cond, a, b, loc=kw.loc)
        t = self.number()
        return A.Target(int(t.text), loc=t.loc)

    def expr(self, min_prec: int = 1) -> A.Expr:
        left = self.primary()
        while self.tok.kind == "op" and A.PRECEDENCE.get(self.tok.text, 0) >= min_prec:
            op = self.advance()
            right = self.expr(A.PRECEDENCE[op.text] + 1)
            left = A.BinOp(op.text, left, right, loc=op.loc)
        return left

    def primary(self) -> A.Expr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            return A.Number(int(t.text), loc=t.loc)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("Mux"):
            self.advance()
            self.expect("(")
            c = self.expr()
            self.expect(",")
            a = self.expr()
            self.expect(",")
            b = self.expr()
            self.expect(")")
            return A.Mux(c, a, b, loc=t.loc)
        if t.kind == "ident":
            self.advance()
            if not self.at("."):
                return A.Ident(t.text, loc=t.loc)
            self.advance()
            if self.at("ready") or self.at("valid"):
                which = self.advance().text
                if self.at("("):
                    self.advance()
                    self.expect(")")
                cls = A.ChannelReady if which == "ready" else A.ChannelValid
                return cls(t.text, loc=t.loc)
            self.fail("'ready' or 'valid'")
        self.fail("expression")


# -- name resolution -----------------------------------------------------------


def _at(node) -> A.Loc:
    return getattr(node, "loc", None) or _DEFAULT_LOC


def _err(node, msg: str, code: str) -> Diagnostic:
    return Diagnostic(ERROR, msg, _at(node), code)


def _warn(node, msg: str, code: str) -> Diagnostic:
    return Diagnostic(WARNING, msg, _at(node), code)


def _resolve_module(decl: A.ModuleDecl) -> Iterable[Diagnostic]:
    seen: set[str] = set()
    for d in decl.declarations:
        if d.name in seen:
            yield _err(d, f"duplicate declaration {d.name!r} in module {decl.name}", DUPLICATE)
        seen.add(d.name)
        if isinstance(d, A.MemBank) and d.size < 1:
            yield _err(d, f"memory bank {d.name!r} must have size >= 1", SYNTAX)

    numbers: set[int] = set()
    for st in decl.states:
        if st.number < 1:
            yield _err(st, f"state numbers must be positive, got {st.number}", SYNTAX)
        if st.number in numbers:
            yield _err(st, f"duplicate state {st.number} in module {decl.name}", DUPLICATE)
        numbers.add(st.number)
    if 1 not in numbers:
        yield _err(decl, f"module {decl.name} has no initial state 1", NO_INITIAL)

    def want(node, name: str, kinds: tuple, what: str):
        d = decl.declared(name)
        if d is None:
            return _err(node, f"unresolved {what} {name!r} in module {decl.name}", UNRESOLVED)
        if not isinstance(d, kinds):
            return _err(node, f"{name!r} is not {what}", KIND)
        return None

    def check_expr(e: A.Expr):
        for sub in A.iter_expr(e):
            if isinstance(sub, A.Ident):
                yield want(sub, sub.name, (A.IntReg,), "an int register")
            elif isinstance(sub, (A.ChannelReady, A.ChannelValid)):
                yield want(sub, sub.stream, (A.InStream, A.OutStream), "a stream")

    for st in decl.states:
        exprs: list[A.Expr] = [] if st.guard is None else [st.guard]
        exprs += A.goto_conditions(st.goto)
        found = []
        for s in st.statements:
            exprs += A.statement_exprs(s)
            if isinstance(s, (A.Assign, A.MemRead, A.ChannelRead)):
                found.append(want(s, s.target, (A.IntReg,), "an int register"))
            if isinstance(s, (A.MemWrite, A.MemRead)):
                found.append(want(s, s.bank, (A.MemBank,), "a memory bank"))
            elif isinstance(s, A.ChannelWrite):
                found.append(want(s, s.stream, (A.OutStream,), "an outstream"))
            elif isinstance(s, A.ChannelRead):
                found.append(want(s, s.stream, (A.InStream,), "an instream"))
        for e in exprs:
            found += list(check_expr(e))
        yield from (d for d in found if d is not None)


def resolve_program(p: A.Program) -> list[Diagnostic]:
    """Name-resolution and arity checks that every well-formed tree satisfies."""
    diags: list[Diagnostic] = []
    names: set[str] = set()
    for inst in p.instances:
        if inst.instance_name in names:
            diags.append(_err(inst, f"duplicate instance {inst.instance_name!r}", DUPLICATE))
        names.add(inst.instance_name)
    decl_names: set[str] = set()
    for d in p.declarations:
        if d.name in decl_names:
            diags.append(_err(d, f"duplicate module declaration {d.name!r}", DUPLICATE))
        decl_names.add(d.name)
    for inst in p.instances:
        if inst.decl_name not in decl_names:
            diags.append(_err(inst, f"unresolved module declaration {inst.decl_name!r}", UNRESOLVED))

    inst_decl = {i.instance_name: p.decl_map.get(i.decl_name) for i in p.instances}
    for c in p.connections:
        for inst, stream, kind, what in (
            (c.from_instance, c.from_stream, A.OutStream, "an outstream"),
            (c.to_instance, c.to_stream, A.InStream, "an instream"),
        ):
            if inst not in inst_decl:
                diags.append(_err(c, f"unresolved instance {inst!r}", UNRESOLVED))
                continue
            decl = inst_decl[inst]
            if decl is None:
                continue
            d = decl.declared(stream)
            if d is None:
                diags.append(_err(c, f"unresolved stream {inst}.{stream}", UNRESOLVED))
            elif not isinstance(d, kind):
                diags.append(_err(c, f"{inst}.{stream} is not {what}", KIND))

    for d in p.declarations:
        diags.extend(_resolve_module(d))
    return diags


# -- validator -----------------------------------------------------------------


def _guard_tests(guard: Optional[A.Expr], cls, stream: str) -> bool:
    if guard is None:
        return False
    return any(isinstance(e, cls) and e.stream == stream for e in A.iter_expr(guard))


def _validate_state(decl: A.ModuleDecl, st: A.StateDecl) -> Iterable[Diagnostic]:
    reads: Counter = Counter()
    writes: Counter = Counter()
    for s in st.statements:
        if isinstance(s, A.MemRead):
            reads[s.bank] += 1
            if reads[s.bank] == 2:
                yield _err(s, f"more than one read of memory bank {s.bank!r} in state {st.number}", MEM_ACCESS)
        elif isinstance(s, A.MemWrite):
            writes[s.bank] += 1
            if writes[s.bank] == 2:
                yield _err(s, f"more than one write to memory bank {s.bank!r} in state {st.number}", MEM_ACCESS)

    for s in st.statements:
        if isinstance(s, A.ChannelRead) and not _guard_tests(st.guard, A.ChannelValid, s.stream):
            yield _warn(s, f"read from {s.stream!r} in state {st.number} is not guarded by '{s.stream}.valid()'", COMM_GUARD)
        elif isinstance(s, A.ChannelWrite) and not _guard_tests(st.guard, A.ChannelReady, s.stream):
            yield _warn(s, f"write to {s.stream!r} in state {st.number} is not guarded by '{s.stream}.ready()'", COMM_GUARD)

    targets: set[str] = set()
    streams_written: set[str] = set()
    for s in st.statements:
        if isinstance(s, (A.Assign, A.MemRead, A.ChannelRead)):
            if s.target in targets:
                yield _warn(s, f"register {s.target!r} assigned more than once in state {st.number}; the first assignment wins", DUP_TARGET)
            targets.add(s.target)
        elif isinstance(s, A.ChannelWrite):
            if s.stream in streams_written:
                yield _warn(s, f"stream {s.stream!r} written more than once in state {st.number}; the first write wins", DUP_TARGET)
            streams_written.add(s.stream)

    declared = {x.number for x in decl.states}
    for t in A.goto_targets(st.goto):
        if t.state not in declared:
            yield _err(t, f"goto target {t.state} is not a state of module {decl.name}", GOTO_TARGET)


def validate_program(p: A.Program) -> list[Diagnostic]:
    """Check the well-formedness rules that go beyond name resolution.

    Returned diagnostics are sorted by source location; warnings are mixed in
    with errors.
    """
    diags: list[Diagnostic] = []

    endpoints: Counter = Counter()
    for c in p.connections:
        endpoints[(c.from_instance, c.from_stream)] += 1
        endpoints[(c.to_instance, c.to_stream)] += 1
    for inst in p.instances:
        decl = p.decl_map.get(inst.decl_name)
        if decl is None:
            continue
        for s in decl.streams:
            n = endpoints[(inst.instance_name, s.name)]
            if n == 0:
                diags.append(_err(inst, f"stream {inst.instance_name}.{s.name} is not connected", STREAM_CONNECTION))
            elif n > 1:
                diags.append(_err(inst, f"stream {inst.instance_name}.{s.name} is connected {n} times", STREAM_CONNECTION))

    for decl in p.declarations:
        for st in decl.states:
            diags.extend(_validate_state(decl, st))
    return sorted(diags, key=lambda d: (d.location, d.code, d.message))


# -- entry points --------------------------------------------------------------


def parse_program(source) -> ParseResult:
    """Parse and validate ``source``; never raises on bad input."""
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    tokens, diags = tokenize(source)
    parser = _Parser(tokens)
    program = parser.program()
    diags = diags + parser.diags
    if program is not None and not diags:
        diags = resolve_program(program)
        if not any(d.severity == ERROR for d in diags):
            diags += validate_program(program)
    diags.sort(key=lambda d: (d.location, d.code, d.message))
    if any(d.severity == ERROR for d in diags):
        program = None
    return ParseResult(program, diags)


def parse(source: str) -> A.Program:
    """Parse ``source`` and return the Program, raising ParseError on errors."""
    result = parse_program(source)
    if result.program is None:
        raise ParseError(result.errors)
    return result.program
