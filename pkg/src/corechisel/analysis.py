"""Communication analysis: the collecting semantics over channel status bits.

Abstract environments keep only the ready/valid bits of every channel (as
subsets of {0, 1}), each instance's FSM state and the stream-to-channel
numbers. Data registers, memory and channel data are dropped, so guards over
data are unknown and both outcomes are explored. The set of reachable
abstract environments is computed by a worklist until nothing new appears.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from . import ast as A
from .environment import READY, STATE, VALID, Env, RegKey, format_value, overlay
from .interpreter import apply_op, init_env, SimulationError, Trace

BitSet = frozenset
ZERO = frozenset({0})
ONE = frozenset({1})
BOTH = frozenset({0, 1})

# An abstract value is a finite set of integers, or TOP for "any integer".
TOP = None

AbstractEnv = Env


def status_keys(p: A.Program) -> list[RegKey]:
    keys = []
    for ch, _ in p.channels():
        keys += [RegKey(ch, READY), RegKey(ch, VALID)]
    return keys


def alpha(sigma: Mapping, p: A.Program) -> AbstractEnv:
    """Project a concrete environment onto status bits and state numbers."""
    out = {}
    for key in status_keys(p):
        out[key] = frozenset({sigma[key]})
    for inst in p.instances:
        m = inst.instance_name
        out[RegKey(m, STATE)] = sigma[RegKey(m, STATE)]
        for s in p.decl_map[inst.decl_name].streams:
            key = RegKey(m, s.name)
            if key in sigma:
                out[key] = sigma[key]
    return Env(out)


# -- abstract expressions ------------------------------------------------------


def _truth(v) -> frozenset:
    if v is TOP:
        return BOTH
    return frozenset(int(x != 0) for x in v)


def _channel_bits(env: Mapping, m: str, stream: str) -> tuple[frozenset, frozenset]:
    c = env[RegKey(m, stream)]
    return env[RegKey(c, READY)], env[RegKey(c, VALID)]


def abstract_eval(e: A.Expr, env: Mapping, m: str):
    """Set of possible values of ``e``, or TOP when data registers matter."""
    if isinstance(e, A.Number):
        return frozenset({e.value})
    if isinstance(e, A.Ident):
        return TOP
    if isinstance(e, (A.ChannelReady, A.ChannelValid)):
        ready, valid = _channel_bits(env, m, e.stream)
        want = 1 if isinstance(e, A.ChannelValid) else 0
        # pointwise lifting; equals the two-comprehension form on singletons
        return frozenset(int(r == 1 and v == want) for r in ready for v in valid)
    if isinstance(e, A.Mux):
        cond = abstract_eval(e.cond, env, m)
        parts = []
        if cond is TOP or 1 in cond:
            parts.append(abstract_eval(e.then, env, m))
        if cond is TOP or any(c != 1 for c in cond):
            parts.append(abstract_eval(e.otherwise, env, m))
        if any(x is TOP for x in parts):
            return TOP
        return frozenset().union(*parts)
    if isinstance(e, A.BinOp):
        left = abstract_eval(e.left, env, m)
        right = abstract_eval(e.right, env, m)
        if e.op in A.LOGIC_OPS:
            left, right = _truth(left), _truth(right)
        elif left is TOP or right is TOP:
            return BOTH if e.op in A.COMPARISON_OPS else TOP
        out = set()
        for a, b in itertools.product(left, right):
            try:
                out.add(apply_op(e.op, a, b))
            except SimulationError:
                pass
        return frozenset(out)
    raise TypeError(f"not an expression: {e!r}")


def abstract_eval_guard(e: Optional[A.Expr], env: Mapping, m: str) -> BitSet:
    """May-be-1 / may-be-0 outcome of a guard; a missing guard is true."""
    if e is None:
        return ONE
    v = abstract_eval(e, env, m)
    if v is TOP:
        return BOTH
    return frozenset(1 if x == 1 else 0 for x in v)


def abstract_eval_goto(g: A.GotoExpr, env: Mapping = None, m: str = None) -> frozenset:
    """All targets a goto expression can select; Mux conditions are not refined."""
    if isinstance(g, A.Target):
        return frozenset({g.state})
    return abstract_eval_goto(g.then, env, m) | abstract_eval_goto(g.otherwise, env, m)


# -- abstract transitions ------------------------------------------------------


def abstract_statement_delta(s: A.Statement, env: Mapping, m: str) -> dict[RegKey, frozenset]:
    if isinstance(s, A.ChannelWrite):
        return {RegKey(env[RegKey(m, s.stream)], VALID): ONE}
    if isinstance(s, A.ChannelRead):
        return {RegKey(env[RegKey(m, s.stream)], READY): ZERO}
    return {}


def abstract_module_step(decl: A.ModuleDecl, env: Mapping, m: str) -> list[Env]:
    """Possible deltas contributed by instance ``m`` in one cycle.

    The empty delta means the instance idles; one delta per reachable goto
    target is produced when the guard may hold.
    """
    st = decl.state_map[env[RegKey(m, STATE)]]
    guard = abstract_eval_guard(st.guard, env, m)
    out: list[Env] = []
    if 0 in guard:
        out.append(Env())
    if 1 in guard:
        stmts: dict = {}
        for s in st.statements:
            for k, v in abstract_statement_delta(s, env, m).items():
                stmts.setdefault(k, v)
        for t in sorted(abstract_eval_goto(st.goto, env, m)):
            d = dict(stmts)
            d.setdefault(RegKey(m, STATE), t)
            out.append(Env(d))
    return out


def abstract_reset(p: A.Program, env: Mapping) -> Env:
    delta = {}
    for _, c in p.channels():
        ch = env[RegKey(c.from_instance, c.from_stream)]
        ready = env[RegKey(ch, READY)]
        if ready == BOTH:
            delta.setdefault(RegKey(ch, READY), ONE)
            delta.setdefault(RegKey(ch, VALID), ZERO | env[RegKey(ch, VALID)])
        elif ready == ZERO:
            delta.setdefault(RegKey(ch, READY), ONE)
            delta.setdefault(RegKey(ch, VALID), ZERO)
    return Env(delta)


def abstract_step(p: A.Program, env: AbstractEnv) -> list[AbstractEnv]:
    """Successors of ``env``: every combination of per-instance choices."""
    choices = [abstract_module_step(p.decl_of(m), env, m) for m in p.instance_names]
    reset = abstract_reset(p, env)
    seen: dict[Env, None] = {}
    for combo in itertools.product(*choices):
        delta = Env()
        for d in combo:
            delta = overlay(delta, d)
        seen.setdefault(overlay(overlay(delta, reset), env), None)
    return list(seen)


# -- fixpoint and report -------------------------------------------------------


class ReachableSet:
    """Deduplicated abstract environments, in discovery order."""

    def __init__(self, envs: Iterable[AbstractEnv] = ()):
        self._envs: dict[AbstractEnv, None] = {}
        for e in envs:
            self.add(e)

    def add(self, env: AbstractEnv) -> bool:
        if env in self._envs:
            return False
        self._envs[env] = None
        return True

    def __contains__(self, env) -> bool:
        return env in self._envs

    def __iter__(self) -> Iterator[AbstractEnv]:
        return iter(self._envs)

    def __len__(self) -> int:
        return len(self._envs)

    def __eq__(self, other) -> bool:
        if isinstance(other, ReachableSet):
            return set(self._envs) == set(other._envs)
        return NotImplemented

    def as_set(self) -> frozenset:
        return frozenset(self._envs)


@dataclass(frozen=True)
class Configuration:
    """A reachable env seen from one instance: channel bits and others' states."""

    channels: tuple[tuple[int, frozenset, frozenset], ...]
    others: tuple[tuple[str, int], ...]

    def sort_key(self) -> tuple:
        chans = tuple((c, tuple(sorted(r)), tuple(sorted(v))) for c, r, v in self.channels)
        return (chans, self.others)

    def render(self) -> str:
        parts = []
        for c, r, v in self.channels:
            parts.append(f"{c},ready: {format_value(r)}")
            parts.append(f"{c},valid: {format_value(v)}")
        parts += [f"{m},state: {n}" for m, n in self.others]
        return "// " + "  ".join(parts)

    def to_json(self) -> dict:
        return {
            "channels": [{"channel": c, "ready": sorted(r), "valid": sorted(v)} for c, r, v in self.channels],
            "states": {m: n for m, n in self.others},
        }


@dataclass(frozen=True)
class ReportGroup:
    instance: str
    state: int
    configurations: tuple[Configuration, ...]

    def render(self) -> str:
        lines = [f"{self.instance},state : {self.state}"]
        lines += [c.render() for c in self.configurations]
        return "\n".join(lines)


@dataclass(frozen=True)
class AnalysisReport:
    groups: tuple[ReportGroup, ...]
    reachable: int

    def group(self, instance: str, state: int) -> Optional[ReportGroup]:
        for g in self.groups:
            if g.instance == instance and g.state == state:
                return g
        return None

    def for_instance(self, instance: str) -> list[ReportGroup]:
        return [g for g in self.groups if g.instance == instance]

    def render_text(self, instances: Optional[Sequence[str]] = None) -> str:
        groups = [g for g in self.groups if instances is None or g.instance in instances]
        return "".join(g.render() + "\n" for g in groups)

    def to_json(self, instances: Optional[Sequence[str]] = None) -> dict:
        return {
            "reachable": self.reachable,
            "groups": [
                {
                    "instance": g.instance,
                    "state": g.state,
                    "configurations": [c.to_json() for c in g.configurations],
                }
                for g in self.groups
                if instances is None or g.instance in instances
            ],
        }


def project(p: A.Program, env: AbstractEnv, instance: str) -> Configuration:
    chans = tuple((ch, env[RegKey(ch, READY)], env[RegKey(ch, VALID)]) for ch, _ in p.channels())
    others = tuple((m, env[RegKey(m, STATE)]) for m in p.instance_names if m != instance)
    return Configuration(chans, others)


def build_report(p: A.Program, reachable: Iterable[AbstractEnv]) -> AnalysisReport:
    envs = list(reachable)
    groups = []
    for inst in p.instances:
        m = inst.instance_name
        by_state: dict[int, set[Configuration]] = {}
        for env in envs:
            by_state.setdefault(env[RegKey(m, STATE)], set()).add(project(p, env, m))
        for n in sorted(by_state):
            confs = tuple(sorted(by_state[n], key=Configuration.sort_key))
            groups.append(ReportGroup(m, n, confs))
    return AnalysisReport(tuple(groups), len(envs))


def analyze(p: A.Program) -> tuple[ReachableSet, AnalysisReport]:
    """Reachable abstract environments of ``p`` and the per-state report."""
    start = alpha(init_env(p), p)
    reachable = ReachableSet([start])
    work = deque([start])
    while work:
        env = work.popleft()
        for nxt in abstract_step(p, env):
            if reachable.add(nxt):
                work.append(nxt)
    return reachable, build_report(p, reachable)


def state_space_bound(p: A.Program) -> int:
    bound = 4 ** len(p.connections)
    for inst in p.instances:
        bound *= len(p.decl_map[inst.decl_name].states)
    return bound


# -- soundness -----------------------------------------------------------------


def covers(abstract: Mapping, concrete: Mapping) -> bool:
    """Whether the abstraction of a concrete env is included in ``abstract``."""
    for key, v in concrete.items():
        if key not in abstract:
            return False
        a = abstract[key]
        if isinstance(v, frozenset):
            if not v <= a:
                return False
        elif a != v:
            return False
    return True


def check_soundness(p: A.Program, trace: Trace) -> bool:
    """Every concrete cycle in ``trace`` is matched by some abstract successor."""
    if not trace.full:
        raise ValueError("check_soundness needs a trace recorded with trace_mode")
    envs = [env for _, env in trace.cycles]
    for before, after in zip(envs, envs[1:]):
        target = alpha(after, p)
        if not any(covers(s, target) for s in abstract_step(p, alpha(before, p))):
            return False
    return True
