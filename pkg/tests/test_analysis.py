import itertools
from pathlib import Path

import pytest

from corechisel import analysis as AN
from corechisel import ast as A
from corechisel import corpus
from corechisel.analysis import (
    BOTH, ONE, ZERO, abstract_eval_goto, abstract_eval_guard, abstract_module_step, abstract_reset,
    abstract_step, alpha, analyze, check_soundness, state_space_bound,
)
from corechisel.environment import Env, RegKey, overlay
from corechisel.interpreter import init_env, run
from corechisel.parser import parse

GOLDEN = Path(__file__).parent / "golden"


def chan_env(ready, valid, **states):
    d = {RegKey("m", "s"): 1, RegKey(1, "ready"): frozenset(ready), RegKey(1, "valid"): frozenset(valid)}
    d.update({RegKey(k, "state"): v for k, v in states.items()})
    return Env(d)


def sendrec_env(sender, receiver, ready, valid):
    return Env({
        (1, "ready"): frozenset(ready), (1, "valid"): frozenset(valid),
        ("sender", "state"): sender, ("receiver", "state"): receiver,
        ("sender", "out"): 1, ("receiver", "in"): 1,
    })


def parse_listing(text: str) -> dict[int, set[tuple]]:
    """Receiver groups of the textual listing as {state: {(ready, valid, sender)}}."""
    groups: dict[int, set[tuple]] = {}
    current = None
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("receiver,state"):
            current = int(line.split(":")[1])
            groups[current] = set()
        elif line.startswith("//"):
            fields = dict(part.split(": ") for part in line[2:].split("  ") if part.strip())
            fields = {k.strip(): v.strip() for k, v in fields.items()}
            groups[current].add((int(fields["1,ready"]), int(fields["1,valid"]), int(fields["sender,state"])))
    return groups


# -- alpha ---------------------------------------------------------------------


def test_alpha_of_initial_env(sendrec):
    assert alpha(init_env(sendrec), sendrec) == sendrec_env(1, 1, {0}, {0})


def test_alpha_lifts_bits_to_singletons(sendrec):
    sigma = overlay(Env({(1, "ready"): 1}), init_env(sendrec))
    a = alpha(sigma, sendrec)
    assert a[RegKey(1, "ready")] == ONE
    assert RegKey(1, "data") not in a and RegKey("sender", "i") not in a


# -- guards and gotos ----------------------------------------------------------


def test_guard_channel_tests():
    valid = A.ChannelValid("s")
    ready = A.ChannelReady("s")
    assert abstract_eval_guard(valid, chan_env({1}, {1}), "m") == ONE
    assert abstract_eval_guard(ready, chan_env({1}, {0, 1}), "m") == BOTH
    assert abstract_eval_guard(ready, chan_env({1}, {0}), "m") == ONE
    assert abstract_eval_guard(ready, chan_env({0}, {0}), "m") == ZERO
    assert abstract_eval_guard(valid, chan_env({0, 1}, {1}), "m") == BOTH


def test_guard_over_data_is_unknown():
    g = A.BinOp("<", A.Ident("j"), A.Number(5))
    assert abstract_eval_guard(g, chan_env({1}, {1}), "m") == BOTH


def test_guard_constants_and_missing_guard():
    e = chan_env({1}, {1})
    assert abstract_eval_guard(A.Number(1), e, "m") == ONE
    assert abstract_eval_guard(A.Number(2), e, "m") == ZERO
    assert abstract_eval_guard(None, e, "m") == ONE


def test_guard_logic_combines_setwise():
    e = chan_env({1}, {0})
    both = A.BinOp("&", A.ChannelReady("s"), A.ChannelValid("s"))
    either = A.BinOp("|", A.ChannelReady("s"), A.ChannelValid("s"))
    assert abstract_eval_guard(both, e, "m") == ZERO
    assert abstract_eval_guard(either, e, "m") == ONE


def test_guard_lifting_is_sound_on_every_bit_combination():
    # the abstract result must contain the concrete result of every member
    subsets = [ZERO, ONE, BOTH]
    for ready, valid in itertools.product(subsets, subsets):
        e = chan_env(ready, valid)
        for node, want in ((A.ChannelReady("s"), 0), (A.ChannelValid("s"), 1)):
            got = abstract_eval_guard(node, e, "m")
            for r, v in itertools.product(ready, valid):
                assert int(r == 1 and v == want) in got


def test_goto_sets():
    i_lt_5 = A.BinOp("<", A.Ident("i"), A.Number(5))
    assert abstract_eval_goto(A.MuxGoto(i_lt_5, A.Target(1), A.Target(2))) == {1, 2}
    assert abstract_eval_goto(A.Target(6)) == {6}
    nested = A.MuxGoto(i_lt_5, A.Target(1), A.MuxGoto(i_lt_5, A.Target(2), A.Target(3)))
    assert abstract_eval_goto(nested) == {1, 2, 3}


# -- transitions ---------------------------------------------------------------


def test_sender_module_step(sendrec):
    decl = sendrec.decl_of("sender")
    ready = sendrec_env(1, 3, {1}, {0})
    assert set(abstract_module_step(decl, ready, "sender")) == {
        Env({(1, "valid"): ONE, ("sender", "state"): 1}),
        Env({(1, "valid"): ONE, ("sender", "state"): 2}),
    }
    full = sendrec_env(1, 3, {1}, {1})
    assert abstract_module_step(decl, full, "sender") == [Env()]


def test_receiver_module_step_without_communication(sendrec):
    decl = sendrec.decl_of("receiver")
    assert abstract_module_step(decl, sendrec_env(1, 4, {0}, {1}), "receiver") == [
        Env({("receiver", "state"): 5})
    ]


def test_receiver_read_clears_ready(sendrec):
    decl = sendrec.decl_of("receiver")
    assert Env({(1, "ready"): ZERO, ("receiver", "state"): 4}) in abstract_module_step(
        decl, sendrec_env(1, 3, {1}, {1}), "receiver")


def test_unknown_guard_gives_idle_and_move():
    p = parse("val m = Module(M)\nmodule M int x\nstate 1 when x == 0 goto 2\nstate 2 goto 2")
    env = alpha(init_env(p), p)
    assert abstract_module_step(p.decl_of("m"), env, "m") == [Env(), Env({("m", "state"): 2})]


def test_abstract_reset(sendrec):
    assert abstract_reset(sendrec, sendrec_env(1, 1, {0}, {1})) == Env({(1, "ready"): ONE, (1, "valid"): ZERO})
    assert abstract_reset(sendrec, sendrec_env(1, 1, {0, 1}, {1})) == Env({(1, "ready"): ONE, (1, "valid"): BOTH})
    assert abstract_reset(sendrec, sendrec_env(1, 1, {1}, {1})) == Env()


def test_successor_of_initial_abstraction(sendrec):
    assert abstract_step(sendrec, alpha(init_env(sendrec), sendrec)) == [sendrec_env(1, 2, {1}, {0})]


def test_step_is_product_of_choices():
    # m has two choices (unknown guard), n has one, so at most two successors
    p = parse("val m = Module(M)\nval n = Module(N)\n"
              "module M int x\nstate 1 when x == 0 goto 2\nstate 2 goto 2\n"
              "module N\nstate 1 goto 1")
    succ = abstract_step(p, alpha(init_env(p), p))
    assert len(succ) == 2


# -- fixpoint ------------------------------------------------------------------


def test_receiver_listing_matches_reference(sendrec):
    _, report = analyze(sendrec)
    expected = parse_listing((GOLDEN / "sendrec_receiver_listing.txt").read_text())
    got = parse_listing(report.render_text(["receiver"]))
    assert got == expected
    assert [len(expected[n]) for n in range(1, 7)] == [1, 1, 3, 2, 2, 3]


def test_full_report_golden(sendrec):
    _, report = analyze(sendrec)
    assert report.render_text() == (GOLDEN / "sendrec_analyze.txt").read_text()


def test_report_canonical_ordering(sendrec):
    _, report = analyze(sendrec)
    for g in report.groups:
        keys = [c.sort_key() for c in g.configurations]
        assert keys == sorted(keys) and len(set(keys)) == len(keys)
    order = [(g.instance, g.state) for g in report.groups]
    assert order == sorted(order, key=lambda k: (sendrec.instance_names.index(k[0]), k[1]))


def kleene(p):
    """Naive ascending iteration X := {a0} ∪ step(X) until nothing changes."""
    start = alpha(init_env(p), p)
    current = frozenset({start})
    while True:
        nxt = current | {s for env in current for s in abstract_step(p, env)}
        if nxt == current:
            return current
        current = nxt


def test_worklist_agrees_with_kleene_iteration(design):
    _, p = design
    reachable, _ = analyze(p)
    assert reachable.as_set() == kleene(p)


def test_single_state_without_channels():
    reachable, _ = analyze(parse("val m = Module(M)\nmodule M\nstate 1 goto 1"))
    assert len(reachable) == 1


def enumerate_space(p):
    """Every abstract env with singleton channel bits and declared state numbers."""
    base = {}
    for inst in p.instances:
        for s in p.decl_map[inst.decl_name].streams:
            base[RegKey(inst.instance_name, s.name)] = init_env(p)[RegKey(inst.instance_name, s.name)]
    bits = [[(RegKey(ch, "ready"), b) for b in (ZERO, ONE)] for ch, _ in p.channels()]
    bits += [[(RegKey(ch, "valid"), b) for b in (ZERO, ONE)] for ch, _ in p.channels()]
    states = [[(RegKey(i.instance_name, "state"), st.number) for st in p.decl_map[i.decl_name].states]
              for i in p.instances]
    for combo in itertools.product(*bits, *states):
        yield Env({**base, **dict(combo)})


def test_reachable_within_enumerated_space(design):
    _, p = design
    reachable, _ = analyze(p)
    space = set(enumerate_space(p))
    assert len(space) == state_space_bound(p)
    assert reachable.as_set() <= space


def test_looping_pair_terminates_within_bound():
    p = parse("val a = Module(A)\nval b = Module(B)\na.out <> b.in\n"
              "module A int i\noutstream out\nstate 1 when out.ready() out.write(i) i = i + 1 goto 1\n"
              "module B int x\ninstream in\nstate 1 when in.valid() x = in.read() goto 2\nstate 2 goto 1")
    reachable, _ = analyze(p)
    assert len(reachable) <= state_space_bound(p) == 4 * 2


def test_concrete_states_are_covered(design):
    _, p = design
    reachable, _ = analyze(p)
    t = run(p, trace_mode=True)
    for _, sigma in t.cycles:
        assert alpha(sigma, p) in reachable


def test_idle_configuration_persists(sendrec):
    # a blocked sender with a full channel has itself in its successor set
    env = sendrec_env(1, 6, {1}, {1})
    assert env in abstract_step(sendrec, env)


def test_analysis_is_deterministic(design):
    _, p = design
    first = analyze(p)
    second = analyze(p)
    assert list(first[0]) == list(second[0])
    assert first[1].render_text() == second[1].render_text()


def test_report_covers_every_reachable_env(design):
    _, p = design
    reachable, report = analyze(p)
    for env in reachable:
        for inst in p.instance_names:
            group = report.group(inst, env[RegKey(inst, "state")])
            assert AN.project(p, env, inst) in group.configurations


def test_report_json_matches_text(sendrec):
    _, report = analyze(sendrec)
    data = report.to_json(["receiver"])
    assert [(g["instance"], g["state"], len(g["configurations"])) for g in data["groups"]] == [
        ("receiver", n, k) for n, k in zip(range(1, 7), [1, 1, 3, 2, 2, 3])
    ]
    assert data["reachable"] == 12


# -- soundness -----------------------------------------------------------------


def test_soundness_on_corpus(design):
    _, p = design
    assert check_soundness(p, run(p, trace_mode=True))


def test_soundness_on_selfloop():
    p = corpus.load("selfloop")
    assert check_soundness(p, run(p, trace_mode=True))


def test_soundness_needs_full_trace(sendrec):
    with pytest.raises(ValueError):
        check_soundness(sendrec, run(sendrec))


def drop_writes(original):
    def mutated(s, env, m):
        if isinstance(s, A.ChannelWrite):
            return {}
        return original(s, env, m)
    return mutated


def test_mutated_write_rule_is_caught(sendrec, monkeypatch):
    trace = run(sendrec, trace_mode=True)
    monkeypatch.setattr(AN, "abstract_statement_delta", drop_writes(AN.abstract_statement_delta))
    assert not check_soundness(sendrec, trace)
