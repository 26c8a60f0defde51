"""Abstract syntax tree for Core Chisel.

All nodes are frozen dataclasses. Source locations are carried on every node
but excluded from equality, so two trees parsed from differently formatted
text compare equal when their structure matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union


@dataclass(frozen=True, order=True)
class Loc:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


def _loc():
    return field(default=None, compare=False, repr=False)


# -- expressions -------------------------------------------------------------

BINARY_OPS = ("+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==", "!=", "&", "|")
COMPARISON_OPS = frozenset({"<", ">", "<=", ">=", "==", "!="})
LOGIC_OPS = frozenset({"&", "|"})

# Binding strength, loosest first. All binary operators are left-associative.
PRECEDENCE = {
    "|": 1,
    "&": 2,
    "==": 3, "!=": 3, "<": 3, ">": 3, "<=": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5, "%": 5,
}


@dataclass(frozen=True)
class Ident:
    name: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Number:
    value: int
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Mux:
    cond: "Expr"
    then: "Expr"
    otherwise: "Expr"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ChannelReady:
    """``s.ready()``: the channel behind stream ``s`` accepts a write."""

    stream: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ChannelValid:
    """``s.valid()``: the channel behind stream ``s`` holds unread data."""

    stream: str
    loc: Optional[Loc] = _loc()


Expr = Union[Ident, Number, BinOp, Mux, ChannelReady, ChannelValid]


# -- goto expressions ----------------------------------------------------------


@dataclass(frozen=True)
class Target:
    state: int
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class MuxGoto:
    cond: Expr
    then: "GotoExpr"
    otherwise: "GotoExpr"
    loc: Optional[Loc] = _loc()


GotoExpr = Union[Target, MuxGoto]


# -- statements ----------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class MemWrite:
    bank: str
    index: Expr
    value: Expr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class MemRead:
    target: str
    bank: str
    index: Expr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ChannelWrite:
    stream: str
    value: Expr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ChannelRead:
    target: str
    stream: str
    loc: Optional[Loc] = _loc()


Statement = Union[Assign, MemWrite, MemRead, ChannelWrite, ChannelRead]


# -- declarations --------------------------------------------------------------


@dataclass(frozen=True)
class IntReg:
    name: str
    initial: int = 0
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class MemBank:
    name: str
    size: int
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class InStream:
    name: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class OutStream:
    name: str
    loc: Optional[Loc] = _loc()


Declaration = Union[IntReg, MemBank, InStream, OutStream]


@dataclass(frozen=True)
class StateDecl:
    number: int
    guard: Optional[Expr]
    statements: tuple[Statement, ...]
    goto: GotoExpr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    declarations: tuple[Declaration, ...]
    states: tuple[StateDecl, ...]
    loc: Optional[Loc] = _loc()

    @cached_property
    def state_map(self) -> dict[int, StateDecl]:
        out: dict[int, StateDecl] = {}
        for st in self.states:
            out.setdefault(st.number, st)
        return out

    def declared(self, name: str) -> Optional[Declaration]:
        for d in self.declarations:
            if d.name == name:
                return d
        return None

    @property
    def streams(self) -> list[Union[InStream, OutStream]]:
        return [d for d in self.declarations if isinstance(d, (InStream, OutStream))]


@dataclass(frozen=True)
class ModuleInstance:
    instance_name: str
    decl_name: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Connection:
    from_instance: str
    from_stream: str
    to_instance: str
    to_stream: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Program:
    instances: tuple[ModuleInstance, ...]
    connections: tuple[Connection, ...]
    declarations: tuple[ModuleDecl, ...]
    loc: Optional[Loc] = _loc()

    @cached_property
    def decl_map(self) -> dict[str, ModuleDecl]:
        out: dict[str, ModuleDecl] = {}
        for d in self.declarations:
            out.setdefault(d.name, d)
        return out

    def decl_of(self, instance: str) -> ModuleDecl:
        for inst in self.instances:
            if inst.instance_name == instance:
                return self.decl_map[inst.decl_name]
        raise KeyError(instance)

    @property
    def instance_names(self) -> list[str]:
        return [inst.instance_name for inst in self.instances]

    def channels(self) -> list[tuple[int, Connection]]:
        """Connections paired with their channel numbers, counted from 1."""
        return list(enumerate(self.connections, start=1))


# -- traversal helpers ---------------------------------------------------------


def iter_expr(e: Expr):
    """Yield ``e`` and every sub-expression, pre-order."""
    yield e
    if isinstance(e, BinOp):
        yield from iter_expr(e.left)
        yield from iter_expr(e.right)
    elif isinstance(e, Mux):
        yield from iter_expr(e.cond)
        yield from iter_expr(e.then)
        yield from iter_expr(e.otherwise)


def goto_targets(g: GotoExpr) -> list[Target]:
    if isinstance(g, Target):
        return [g]
    return goto_targets(g.then) + goto_targets(g.otherwise)


def goto_conditions(g: GotoExpr) -> list[Expr]:
    if isinstance(g, Target):
        return []
    return [g.cond] + goto_conditions(g.then) + goto_conditions(g.otherwise)


def statement_exprs(s: Statement) -> list[Expr]:
    if isinstance(s, Assign):
        return [s.value]
    if isinstance(s, MemWrite):
        return [s.index, s.value]
    if isinstance(s, MemRead):
        return [s.index]
    if isinstance(s, ChannelWrite):
        return [s.value]
    return []


# -- pretty printer ------------------------------------------------------------


def format_expr(e: Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(e, Number):
        return str(e.value)
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, ChannelReady):
        return f"{e.stream}.ready()"
    if isinstance(e, ChannelValid):
        return f"{e.stream}.valid()"
    if isinstance(e, Mux):
        return f"Mux({format_expr(e.cond)}, {format_expr(e.then)}, {format_expr(e.otherwise)})"
    if isinstance(e, BinOp):
        prec = PRECEDENCE[e.op]
        text = f"{format_expr(e.left, prec)} {e.op} {format_expr(e.right, prec, True)}"
        if prec < parent_prec or (right_side and prec == parent_prec):
            return f"({text})"
        return text
    raise TypeError(f"not an expression: {e!r}")


def format_goto(g: GotoExpr) -> str:
    if isinstance(g, Target):
        return str(g.state)
    return f"Mux({format_expr(g.cond)}, {format_goto(g.then)}, {format_goto(g.otherwise)})"


def format_statement(s: Statement) -> str:
    if isinstance(s, Assign):
        return f"{s.target} = {format_expr(s.value)}"
    if isinstance(s, MemWrite):
        return f"{s.bank}[{format_expr(s.index)}] = {format_expr(s.value)}"
    if isinstance(s, MemRead):
        return f"{s.target} = {s.bank}[{format_expr(s.index)}]"
    if isinstance(s, ChannelWrite):
        return f"{s.stream}.write({format_expr(s.value)})"
    if isinstance(s, ChannelRead):
        return f"{s.target} = {s.stream}.read()"
    raise TypeError(f"not a statement: {s!r}")


def format_declaration(d: Declaration) -> str:
    if isinstance(d, IntReg):
        return f"int {d.name} = {d.initial}"
    if isinstance(d, MemBank):
        return f"int [{d.size}] {d.name}"
    if isinstance(d, InStream):
        return f"instream {d.name}"
    return f"outstream {d.name}"


def _format_state(st: StateDecl) -> list[str]:
    head = f"state {st.number}"
    if st.guard is not None:
        head += f" when {format_expr(st.guard)}"
    if not st.statements:
        return [f"{head} goto {format_goto(st.goto)}"]
    lines = [head]
    lines += [f"  {format_statement(s)}" for s in st.statements]
    lines.append(f"  goto {format_goto(st.goto)}")
    return lines


def pretty_print(p: Program) -> str:
    """Render ``p`` as Core Chisel source that parses back to an equal tree."""
    lines = [f"val {m.instance_name} = Module({m.decl_name})" for m in p.instances]
    lines += [
        f"{c.from_instance}.{c.from_stream} <> {c.to_instance}.{c.to_stream}"
        for c in p.connections
    ]
    for decl in p.declarations:
        lines.append("")
        lines.append(f"module {decl.name}")
        lines += [format_declaration(d) for d in decl.declarations]
        for st in decl.states:
            lines += _format_state(st)
    return "\n".join(lines) + "\n"
