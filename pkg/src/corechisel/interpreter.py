"""Cycle-accurate interpreter for Core Chisel.

Each clock cycle computes a delta environment from the pre-cycle state
(the active state of every instance plus channel resets) and overlays it on
the previous environment. A run stops when a cycle changes nothing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

from . import ast as A
from .environment import (
    DATA,
    READY,
    STATE,
    VALID,
    Env,
    RegKey,
    UNDEFINED,
    lookup,
    mem_cell,
    overlay,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_CYCLES = 10_000

STABLE = "stable"
MAX_CYCLES = "max_cycles_reached"
RUNTIME_ERROR = "runtime_error"

DIVISION_BY_ZERO = "division_by_zero"
INDEX_OUT_OF_BOUNDS = "memory_index_out_of_bounds"
CONFLICTING_WRITE = "conflicting_write"
UNDEFINED_REGISTER = "undefined_register"

_MASK = (1 << 64) - 1
_SIGN = 1 << 63


def wrap64(x: int) -> int:
    x &= _MASK
    return x - (1 << 64) if x & _SIGN else x


class SimulationError(Exception):
    def __init__(self, kind: str, message: str, instance: Optional[str] = None,
                 location: Optional[A.Loc] = None, cycle: Optional[int] = None):
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.instance = instance
        self.location = location
        self.cycle = cycle

    def __str__(self) -> str:
        where = f" at {self.location}" if self.location else ""
        who = f" in {self.instance}" if self.instance else ""
        when = f" (cycle {self.cycle})" if self.cycle is not None else ""
        return f"{self.kind}{who}{where}{when}: {self.message}"


@dataclass(frozen=True)
class ChannelEvent:
    """A status-bit update on a channel during the step from ``cycle``."""

    cycle: int
    kind: str  # "write", "read" or "reset"
    channel: int
    instance: Optional[str] = None


@dataclass(frozen=True)
class RuntimeIssue:
    kind: str
    message: str
    cycle: int
    instance: Optional[str] = None


@dataclass
class Trace:
    cycles: list[tuple[int, Env]]
    status: str
    events: list[ChannelEvent] = field(default_factory=list)
    warnings: list[RuntimeIssue] = field(default_factory=list)
    error: Optional[SimulationError] = None
    full: bool = True

    @property
    def final(self) -> Env:
        return self.cycles[-1][1]

    @property
    def cycle_count(self) -> int:
        return self.cycles[-1][0]

    def count(self, kind: str, channel: Optional[int] = None) -> int:
        return sum(1 for e in self.events
                   if e.kind == kind and (channel is None or e.channel == channel))


# -- initial environment -------------------------------------------------------


def init_env(p: A.Program, paper_literal_meminit: bool = False) -> Env:
    """The power-on environment of ``p``.

    Memory cells start at zero; with ``paper_literal_meminit`` every cell of a
    bank instead starts at the bank size.
    """
    env: dict[RegKey, int] = {}
    for ch, c in p.channels():
        env[RegKey(c.from_instance, c.from_stream)] = ch
        env[RegKey(c.to_instance, c.to_stream)] = ch
        env[RegKey(ch, READY)] = 0
        env[RegKey(ch, VALID)] = 0
        env[RegKey(ch, DATA)] = 0
    for inst in p.instances:
        m = inst.instance_name
        for d in p.decl_map[inst.decl_name].declarations:
            if isinstance(d, A.IntReg):
                env[RegKey(m, d.name)] = d.initial
            elif isinstance(d, A.MemBank):
                fill = d.size if paper_literal_meminit else 0
                for k in range(d.size):
                    env[RegKey(m, mem_cell(d.name, k))] = fill
        env[RegKey(m, STATE)] = 1
    return Env(env)


# -- expressions ---------------------------------------------------------------


def _read(sigma: Mapping, key: RegKey, node, m: str) -> int:
    v = lookup(sigma, key)
    if v is UNDEFINED:
        raise SimulationError(UNDEFINED_REGISTER, f"register {key} is undefined", m, getattr(node, "loc", None))
    return v


def _channel_of(sigma: Mapping, m: str, stream: str, node) -> int:
    return _read(sigma, RegKey(m, stream), node, m)


def _divide(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def apply_op(op: str, a: int, b: int, node=None, m: Optional[str] = None) -> int:
    if op == "+":
        return wrap64(a + b)
    if op == "-":
        return wrap64(a - b)
    if op == "*":
        return wrap64(a * b)
    if op in ("/", "%"):
        if b == 0:
            raise SimulationError(DIVISION_BY_ZERO, f"'{op}' by zero", m, getattr(node, "loc", None))
        q = _divide(a, b)
        return wrap64(q) if op == "/" else wrap64(a - b * q)
    if op == "<":
        return int(a < b)
    if op == ">":
        return int(a > b)
    if op == "<=":
        return int(a <= b)
    if op == ">=":
        return int(a >= b)
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "&":
        return int(a != 0 and b != 0)
    if op == "|":
        return int(a != 0 or b != 0)
    raise ValueError(f"unknown operator {op!r}")


def eval_expr(e: A.Expr, sigma: Mapping, m: str) -> int:
    if isinstance(e, A.Number):
        return wrap64(e.value)
    if isinstance(e, A.Ident):
        return _read(sigma, RegKey(m, e.name), e, m)
    if isinstance(e, A.BinOp):
        return apply_op(e.op, eval_expr(e.left, sigma, m), eval_expr(e.right, sigma, m), e, m)
    if isinstance(e, A.Mux):
        if eval_expr(e.cond, sigma, m) == 1:
            return eval_expr(e.then, sigma, m)
        return eval_expr(e.otherwise, sigma, m)
    if isinstance(e, (A.ChannelReady, A.ChannelValid)):
        c = _channel_of(sigma, m, e.stream, e)
        ready = _read(sigma, RegKey(c, READY), e, m)
        valid = _read(sigma, RegKey(c, VALID), e, m)
        want_valid = 1 if isinstance(e, A.ChannelValid) else 0
        return int(ready == 1 and valid == want_valid)
    raise TypeError(f"not an expression: {e!r}")


def eval_goto(g: A.GotoExpr, sigma: Mapping, m: str) -> int:
    while isinstance(g, A.MuxGoto):
        g = g.then if eval_expr(g.cond, sigma, m) == 1 else g.otherwise
    return g.state


# -- transitions ---------------------------------------------------------------


class _Delta:
    """First-wins accumulator mirroring a left-to-right chain of overlays."""

    def __init__(self, cycle: int, warnings: Optional[list], strict: bool):
        self.data: dict[RegKey, int] = {}
        self.owner: dict[RegKey, str] = {}
        self.cycle = cycle
        self.warnings = warnings
        self.strict = strict

    def put(self, key: RegKey, value: int, who: str, node=None) -> None:
        if key in self.data:
            msg = f"{key} written by {self.owner[key]} and {who} in the same cycle; keeping the first"
            if self.strict:
                raise SimulationError(CONFLICTING_WRITE, msg, who, getattr(node, "loc", None), self.cycle)
            log.warning("cycle %d: %s", self.cycle, msg)
            if self.warnings is not None:
                self.warnings.append(RuntimeIssue(CONFLICTING_WRITE, msg, self.cycle, who))
            return
        self.data[key] = value
        self.owner[key] = who


def reset_channels(p: A.Program, sigma: Mapping) -> Env:
    """Delta that re-arms every channel whose ready bit is 0."""
    delta: dict[RegKey, int] = {}
    for ch, c in p.channels():
        chan = lookup(sigma, RegKey(c.from_instance, c.from_stream))
        if chan is UNDEFINED:
            chan = ch
        if lookup(sigma, RegKey(chan, READY)) == 0:
            delta[RegKey(chan, READY)] = 1
            delta[RegKey(chan, VALID)] = 0
    return Env(delta)


def _bank_index(decl: A.ModuleDecl, bank: str, index: int, m: str, node) -> str:
    d = decl.declared(bank)
    if not isinstance(d, A.MemBank) or not 0 <= index < d.size:
        size = d.size if isinstance(d, A.MemBank) else 0
        raise SimulationError(INDEX_OUT_OF_BOUNDS, f"index {index} outside {bank}[0..{size})", m, node.loc)
    return mem_cell(bank, index)


def _statement(s: A.Statement, decl: A.ModuleDecl, sigma: Mapping, m: str,
               delta: _Delta, events: Optional[list], cycle: int) -> None:
    if isinstance(s, A.Assign):
        delta.put(RegKey(m, s.target), eval_expr(s.value, sigma, m), m, s)
    elif isinstance(s, A.MemWrite):
        cell = _bank_index(decl, s.bank, eval_expr(s.index, sigma, m), m, s)
        delta.put(RegKey(m, cell), eval_expr(s.value, sigma, m), m, s)
    elif isinstance(s, A.MemRead):
        cell = _bank_index(decl, s.bank, eval_expr(s.index, sigma, m), m, s)
        delta.put(RegKey(m, s.target), _read(sigma, RegKey(m, cell), s, m), m, s)
    elif isinstance(s, A.ChannelWrite):
        c = _channel_of(sigma, m, s.stream, s)
        delta.put(RegKey(c, DATA), eval_expr(s.value, sigma, m), m, s)
        delta.put(RegKey(c, VALID), 1, m, s)
        if events is not None:
            events.append(ChannelEvent(cycle, "write", c, m))
    elif isinstance(s, A.ChannelRead):
        c = _channel_of(sigma, m, s.stream, s)
        delta.put(RegKey(m, s.target), _read(sigma, RegKey(c, DATA), s, m), m, s)
        delta.put(RegKey(c, READY), 0, m, s)
        if events is not None:
            events.append(ChannelEvent(cycle, "read", c, m))
    else:
        raise TypeError(f"not a statement: {s!r}")


def active_state(decl: A.ModuleDecl, sigma: Mapping, m: str) -> A.StateDecl:
    n = _read(sigma, RegKey(m, STATE), decl, m)
    st = decl.state_map.get(n)
    if st is None:
        raise SimulationError(UNDEFINED_REGISTER, f"{m} is in undeclared state {n}", m, decl.loc)
    return st


def instance_delta(p: A.Program, m: str, sigma: Mapping, delta: _Delta,
                   events: Optional[list] = None, cycle: int = 0) -> None:
    decl = p.decl_of(m)
    st = active_state(decl, sigma, m)
    if st.guard is not None and eval_expr(st.guard, sigma, m) != 1:
        return
    for s in st.statements:
        _statement(s, decl, sigma, m, delta, events, cycle)
    delta.put(RegKey(m, STATE), eval_goto(st.goto, sigma, m), m, st)


def step(p: A.Program, sigma: Mapping, *, cycle: int = 0, events: Optional[list] = None,
         warnings: Optional[list] = None, strict: bool = False) -> Env:
    """Delta produced by one clock cycle from pre-cycle environment ``sigma``.

    If ``events`` is a list, channel status updates are appended to it as
    :class:`ChannelEvent` records. Simultaneous writes of one key keep the
    first; with ``strict`` they raise instead.
    """
    delta = _Delta(cycle, warnings, strict)
    for m in p.instance_names:
        instance_delta(p, m, sigma, delta, events, cycle)
    resets = reset_channels(p, sigma)
    if events is not None:
        for key in resets:
            if key.register == READY:
                events.append(ChannelEvent(cycle, "reset", key.namespace))
    for key, value in resets.sorted_items():
        delta.put(key, value, "reset")
    return Env(delta.data)


def run(p: A.Program, max_cycles: int = DEFAULT_MAX_CYCLES, trace_mode: bool = False,
        *, paper_literal_meminit: bool = False, strict: bool = False) -> Trace:
    """Iterate cycles from the initial environment until nothing changes.

    With ``trace_mode`` every cycle's environment is kept; otherwise only the
    first and the last.
    """
    sigma = init_env(p, paper_literal_meminit)
    trace = Trace([(0, sigma)], MAX_CYCLES, full=trace_mode)
    cycle = 0
    while cycle < max_cycles:
        events: list[ChannelEvent] = []
        try:
            delta = step(p, sigma, cycle=cycle, events=events, warnings=trace.warnings, strict=strict)
        except SimulationError as err:
            err.cycle = cycle
            trace.error = err
            trace.status = RUNTIME_ERROR
            break
        nxt = overlay(delta, sigma)
        if nxt == sigma:
            trace.status = STABLE
            break
        cycle += 1
        trace.events.extend(events)
        sigma = nxt
        if trace_mode or len(trace.cycles) == 1:
            trace.cycles.append((cycle, sigma))
        else:
            trace.cycles[-1] = (cycle, sigma)
    return trace


def render_trace_text(trace: Trace) -> str:
    out = []
    for n, env in trace.cycles:
        out.append(f"cycle {n}\n")
        out.append(env.to_text())
    out.append(f"status: {trace.status}\n")
    if trace.error is not None:
        out.append(f"error: {trace.error}\n")
    for w in trace.warnings:
        out.append(f"warning: cycle {w.cycle}: {w.message}\n")
    return "".join(out)


def trace_json_records(trace: Trace) -> list[dict]:
    records: list[dict] = [{"cycle": n, "env": env.to_json()} for n, env in trace.cycles]
    summary: dict = {"status": trace.status, "cycles": trace.cycle_count}
    if trace.error is not None:
        e = trace.error
        summary["error"] = {
            "kind": e.kind,
            "message": e.message,
            "cycle": e.cycle,
            "instance": e.instance,
            "location": None if e.location is None else [e.location.line, e.location.column],
        }
    summary["warnings"] = [
        {"kind": w.kind, "message": w.message, "cycle": w.cycle, "instance": w.instance}
        for w in trace.warnings
    ]
    records.append(summary)
    return records
