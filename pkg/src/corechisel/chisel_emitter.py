"""Translate a Core Chisel program into Chisel (Scala) source.

Registers become ``SInt`` registers. Each outstream is a ``Decoupled`` port.
The channel registers (ready, valid, data) live in the receiving module
behind a ``Flipped(Decoupled)`` port, which keeps the one-cycle write-to-read
and the extra reset cycle of the interpreter. Every FSM state becomes an
``is`` arm of a ``switch`` over the state register.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ast as A

SCALA_RESERVED = frozenset({
    "abstract", "case", "catch", "class", "def", "do", "else", "extends", "false",
    "final", "finally", "for", "forSome", "if", "implicit", "import", "lazy",
    "macro", "match", "new", "null", "object", "override", "package", "private",
    "protected", "return", "sealed", "super", "this", "throw", "trait", "try",
    "true", "type", "val", "var", "while", "with", "yield",
})

_CHISEL_NAMES = frozenset({"io", "state", "clock", "reset", "Bool", "SInt", "UInt"})


@dataclass(frozen=True)
class EmitterConfig:
    width: int = 32
    top_name: str = "Top"

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("register width must be at least 1")


def _scala(name: str) -> str:
    return f"`{name}`" if name in SCALA_RESERVED else name


class _Names:
    """Maps Core Chisel names to Scala identifiers inside one module class."""

    def __init__(self, decl: A.ModuleDecl):
        self.taken = set(_CHISEL_NAMES)
        self.regs: dict[str, str] = {}
        for d in decl.declarations:
            if isinstance(d, (A.IntReg, A.MemBank)):
                self.regs[d.name] = self.fresh(d.name)
        self.chan: dict[str, tuple[str, str, str]] = {}
        for d in decl.declarations:
            if isinstance(d, A.InStream):
                self.chan[d.name] = tuple(self.fresh(f"{d.name}_{r}") for r in ("ready", "valid", "data"))

    def fresh(self, base: str) -> str:
        name, n = base, 1
        while name in self.taken or name in SCALA_RESERVED:
            name = f"{base}_{n}"
            n += 1
        self.taken.add(name)
        return name


class _ModuleEmitter:
    def __init__(self, decl: A.ModuleDecl, cfg: EmitterConfig):
        self.decl = decl
        self.cfg = cfg
        self.names = _Names(decl)

    def sint(self, n: int) -> str:
        return f"{n}.S({self.cfg.width}.W)" if n >= 0 else f"(-{-n}).S({self.cfg.width}.W)"

    # returns (code, is_bool)
    def expr(self, e: A.Expr) -> tuple[str, bool]:
        if isinstance(e, A.Number):
            return self.sint(e.value), False
        if isinstance(e, A.Ident):
            return self.names.regs[e.name], False
        if isinstance(e, (A.ChannelReady, A.ChannelValid)):
            return self.channel_test(e), True
        if isinstance(e, A.Mux):
            cond = self.is_one(e.cond)
            (a, ab), (b, bb) = self.expr(e.then), self.expr(e.otherwise)
            if ab and bb:
                return f"Mux({cond}, {a}, {b})", True
            return f"Mux({cond}, {self.as_sint(a, ab)}, {self.as_sint(b, bb)})", False
        if isinstance(e, A.BinOp):
            (a, ab), (b, bb) = self.expr(e.left), self.expr(e.right)
            if e.op in A.LOGIC_OPS:
                op = "&&" if e.op == "&" else "||"
                return f"({self.as_bool(a, ab)} {op} {self.as_bool(b, bb)})", True
            op = {"==": "===", "!=": "=/="}.get(e.op, e.op)
            bool_result = e.op in A.COMPARISON_OPS
            return f"({self.as_sint(a, ab)} {op} {self.as_sint(b, bb)})", bool_result
        raise TypeError(f"not an expression: {e!r}")

    def channel_test(self, e) -> str:
        decl = self.decl.declared(e.stream)
        if isinstance(decl, A.InStream):
            rdy, vld, _ = self.names.chan[e.stream]
            return f"({rdy} && {vld})" if isinstance(e, A.ChannelValid) else f"({rdy} && !{vld})"
        port = f"io.{_scala(e.stream)}"
        if isinstance(e, A.ChannelReady):
            return f"{port}.ready"
        # the writer side of a Decoupled port cannot observe the channel's valid bit
        return "false.B"

    def as_sint(self, code: str, is_bool: bool) -> str:
        return f"Mux({code}, 1.S, 0.S)" if is_bool else code

    def as_bool(self, code: str, is_bool: bool) -> str:
        return code if is_bool else f"({code} =/= 0.S)"

    def is_one(self, e: A.Expr) -> str:
        code, is_bool = self.expr(e)
        return code if is_bool else f"({code} === 1.S)"

    def goto(self, g: A.GotoExpr) -> str:
        if isinstance(g, A.Target):
            return f"{g.state}.U"
        return f"Mux({self.is_one(g.cond)}, {self.goto(g.then)}, {self.goto(g.otherwise)})"

    def statement(self, s: A.Statement) -> list[str]:
        regs = self.names.regs
        if isinstance(s, A.Assign):
            return [f"{regs[s.target]} := {self.expr_sint(s.value)}"]
        if isinstance(s, A.MemWrite):
            return [f"{regs[s.bank]}({self.expr_sint(s.index)}.asUInt) := {self.expr_sint(s.value)}"]
        if isinstance(s, A.MemRead):
            return [f"{regs[s.target]} := {regs[s.bank]}({self.expr_sint(s.index)}.asUInt)"]
        if isinstance(s, A.ChannelWrite):
            port = f"io.{_scala(s.stream)}"
            return [f"{port}.bits := {self.expr_sint(s.value)}", f"{port}.valid := true.B"]
        if isinstance(s, A.ChannelRead):
            rdy, _, data = self.names.chan[s.stream]
            return [f"{regs[s.target]} := {data}", f"{rdy} := false.B"]
        raise TypeError(f"not a statement: {s!r}")

    def expr_sint(self, e: A.Expr) -> str:
        return self.as_sint(*self.expr(e))

    def emit(self) -> list[str]:
        d, w, names = self.decl, self.cfg.width, self.names
        out = [f"class {_scala(d.name)} extends Module {{", "  val io = IO(new Bundle {"]
        for s in d.streams:
            port = "Decoupled" if isinstance(s, A.OutStream) else "Flipped(Decoupled"
            close = ")" if isinstance(s, A.OutStream) else "))"
            out.append(f"    val {_scala(s.name)} = {port}(SInt({w}.W){close}")
        out.append("  })")

        for decl in d.declarations:
            if isinstance(decl, A.IntReg):
                out.append(f"  val {names.regs[decl.name]} = RegInit({self.sint(decl.initial)})")
            elif isinstance(decl, A.MemBank):
                out.append(f"  val {names.regs[decl.name]} = RegInit(VecInit(Seq.fill({decl.size})(0.S({w}.W))))")
        top_state = max(st.number for st in d.states)
        out.append(f"  val state = RegInit(1.U({max(1, top_state.bit_length())}.W))")

        for s in d.streams:
            port = f"io.{_scala(s.name)}"
            if isinstance(s, A.OutStream):
                out += [f"  {port}.valid := false.B", f"  {port}.bits := 0.S"]
                continue
            rdy, vld, data = names.chan[s.name]
            out += [
                f"  val {rdy} = RegInit(false.B)",
                f"  val {vld} = RegInit(false.B)",
                f"  val {data} = RegInit(0.S({w}.W))",
                f"  {port}.ready := {rdy} && !{vld}",
                f"  when(!{rdy}) {{",
                f"    {rdy} := true.B",
                f"    {vld} := false.B",
                "  }",
                f"  when({port}.valid) {{",
                f"    {data} := {port}.bits",
                f"    {vld} := true.B",
                "  }",
            ]

        out.append("  switch(state) {")
        for st in d.states:
            out.append(f"    is({st.number}.U) {{")
            indent = "      "
            if st.guard is not None:
                out.append(f"      when({self.is_one(st.guard)}) {{")
                indent = "        "
            written: set[str] = set()
            for s in st.statements:
                key = getattr(s, "target", None) or getattr(s, "stream", None)
                if isinstance(s, (A.Assign, A.MemRead, A.ChannelRead, A.ChannelWrite)):
                    if key in written:
                        out.append(f"{indent}// shadowed by an earlier transfer: {A.format_statement(s)}")
                        continue
                    written.add(key)
                out += [indent + line for line in self.statement(s)]
            out.append(f"{indent}state := {self.goto(st.goto)}")
            if st.guard is not None:
                out.append("      }")
            out.append("    }")
        out.append("  }")
        out.append("}")
        return out


def emit_chisel(p: A.Program, cfg: EmitterConfig = EmitterConfig()) -> str:
    lines = ["import chisel3._", "import chisel3.util._", ""]
    for decl in p.declarations:
        lines += _ModuleEmitter(decl, cfg).emit()
        lines.append("")
    top = cfg.top_name
    taken = {d.name for d in p.declarations}
    while top in taken:
        top += "_"
    lines += [f"class {_scala(top)} extends Module {{", "  val io = IO(new Bundle {})"]
    inst_names: dict[str, str] = {}
    used = {"io"}
    for inst in p.instances:
        name, n = inst.instance_name, 1
        while name in used:
            name = f"{inst.instance_name}_{n}"
            n += 1
        used.add(name)
        inst_names[inst.instance_name] = _scala(name)
        lines.append(f"  val {inst_names[inst.instance_name]} = Module(new {_scala(inst.decl_name)})")
    for c in p.connections:
        lines.append(
            f"  {inst_names[c.from_instance]}.io.{_scala(c.from_stream)} <> "
            f"{inst_names[c.to_instance]}.io.{_scala(c.to_stream)}"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def output_filename(cfg: EmitterConfig) -> str:
    return f"{cfg.top_name}.scala"
