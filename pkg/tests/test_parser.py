from hypothesis import given, settings, strategies as st

from corechisel import ast as A
from corechisel import parser as P
from corechisel.parser import parse, parse_program, validate_program

from test_ast import REFERENCE_SENDREC

PAIR = """
val w = Module(W)
val r = Module(R)
w.out <> r.in
module W
outstream out
state 1 when out.ready()
  out.write(1)
  goto 1
module R
int x = 0
int y = 0
int [2] mem
instream in
"""


def codes(result):
    return [d.code for d in result.diagnostics]


def test_parse_sendrec():
    r = parse_program(REFERENCE_SENDREC)
    assert r.diagnostics == []
    p = r.program
    assert len(p.instances) == 2 and len(p.connections) == 1 and len(p.declarations) == 2
    assert [len(d.states) for d in p.declarations] == [2, 6]
    assert p.connections[0] == A.Connection("sender", "out", "receiver", "in")


def test_parse_minimal():
    p = parse("val m = Module(M)\nmodule M state 1 goto 1")
    assert (len(p.instances), len(p.connections), len(p.declarations)) == (1, 0, 1)


def test_missing_declaration_is_unresolved():
    r = parse_program("val m = Module(M)")
    assert r.program is None
    assert [d.code for d in r.errors] == [P.UNRESOLVED]
    assert "unresolved module declaration" in r.errors[0].message


def test_parse_tree_shapes():
    p = parse(REFERENCE_SENDREC)
    sender = p.decl_map["Sender"]
    st1 = sender.state_map[1]
    assert st1.guard == A.ChannelReady("out")
    assert st1.statements == (
        A.ChannelWrite("out", A.Ident("i")),
        A.Assign("i", A.BinOp("+", A.Ident("i"), A.Number(1))),
    )
    assert st1.goto == A.MuxGoto(A.BinOp("<", A.Ident("i"), A.Number(5)), A.Target(1), A.Target(2))
    rec = p.decl_map["Receiver"]
    assert rec.state_map[3].statements == (A.ChannelRead("x", "in"),)
    assert rec.state_map[4].statements[0].value == A.Mux(
        A.BinOp(">", A.Ident("x"), A.Ident("y")), A.Ident("y"), A.Ident("x"))


def test_operator_precedence():
    p = parse("val m = Module(M)\nmodule M int a int b\nstate 1 a = 1 + 2 * 3 < 4 & b | 0 goto 1")
    e = p.declarations[0].states[0].statements[0].value
    assert A.format_expr(e) == "1 + 2 * 3 < 4 & b | 0"
    assert e.op == "|" and e.left.op == "&" and e.left.left.op == "<"


def test_memory_statements_and_negative_initial():
    p = parse("val m = Module(M)\nmodule M int k = -3 int [4] buf\n"
              "state 1 buf[k] = k * 2 k = buf[1] goto 1")
    decl = p.declarations[0]
    assert decl.declarations == (A.IntReg("k", -3), A.MemBank("buf", 4))
    assert decl.states[0].statements == (
        A.MemWrite("buf", A.Ident("k"), A.BinOp("*", A.Ident("k"), A.Number(2))),
        A.MemRead("k", "buf", A.Number(1)),
    )


def test_int_without_initial_defaults_to_zero():
    p = parse("val m = Module(M)\nmodule M int k\nstate 1 goto 1")
    assert p.declarations[0].declarations == (A.IntReg("k", 0),)


def test_comments_are_ignored():
    p = parse("// top\nval m = Module(M) // inst\nmodule M\nstate 1 // idle\n goto 1\n")
    assert len(p.declarations[0].states) == 1


def test_ready_without_parentheses_is_accepted():
    p = parse(PAIR.replace("when out.ready()", "when out.ready") + "state 1 goto 1\n")
    assert p.decl_map["W"].states[0].guard == A.ChannelReady("out")


def test_lexical_error_has_location():
    r = parse_program("val m = Module(M)\nmodule M\nstate 1 x = 3 $ goto 1")
    assert P.LEX in codes(r)
    d = [d for d in r.diagnostics if d.code == P.LEX][0]
    assert (d.location.line, d.location.column) == (3, 15)


def test_syntax_error_has_location_and_render():
    r = parse_program("val m = Module(M)\nmodule M\nstate 1 goto\n")
    assert r.program is None
    d = r.errors[0]
    assert d.code == P.SYNTAX
    assert d.render("f.cc.txt").startswith("f.cc.txt:4:1: error[syntax]: expected number")


def test_keywords_rejected_as_identifiers():
    r = parse_program("val state = Module(M)\nmodule M\nstate 1 goto 1")
    assert r.errors and "reserved word" in r.errors[0].message


def test_resync_reports_errors_in_several_states():
    src = "val m = Module(M)\nmodule M int x\nstate 1 x = goto 1\nstate 2 x = = 1 goto 2\nstate 3 goto 3"
    r = parse_program(src)
    assert [d.location.line for d in r.errors] == [3, 4]


def test_duplicates_are_errors():
    r = parse_program("val m = Module(M)\nval m = Module(M)\nmodule M int x int x\nstate 1 goto 1\nstate 1 goto 1")
    assert codes(r).count(P.DUPLICATE) == 3


def test_unresolved_register_and_stream():
    r = parse_program("val m = Module(M)\nmodule M\nstate 1 when s.valid() q = 1 goto 1")
    assert codes(r).count(P.UNRESOLVED) == 2


def test_kind_mismatches():
    src = PAIR + "state 1 when in.valid()\n  in.write(1)\n  goto 1\n"
    r = parse_program(src)
    assert P.KIND in codes(r)
    r = parse_program(PAIR.replace("w.out <> r.in", "r.in <> w.out") + "state 1 goto 1\n")
    assert codes(r).count(P.KIND) == 2


def test_missing_initial_state():
    r = parse_program("val m = Module(M)\nmodule M\nstate 2 goto 2")
    assert codes(r) == [P.NO_INITIAL]


def test_ordering_of_sections_is_enforced():
    r = parse_program("module M state 1 goto 1\nval m = Module(M)")
    assert r.program is None and r.errors[0].code == P.SYNTAX


def test_empty_input():
    r = parse_program("")
    assert r.program is None
    assert r.errors[0].location == A.Loc(1, 1)


# -- validator -----------------------------------------------------------------


def test_validate_sendrec_is_clean():
    assert validate_program(parse(REFERENCE_SENDREC)) == []


def test_v1_two_writes_to_one_bank():
    r = parse_program(PAIR + "state 1 when in.valid()\n x = in.read()\n mem[0] = 1\n mem[1] = 2\n goto 1\n")
    assert [d.code for d in r.errors] == [P.MEM_ACCESS]


def test_v1_two_reads_from_one_bank():
    r = parse_program(PAIR + "state 1 when in.valid()\n x = in.read()\n y = mem[0]\n goto 2\n"
                      "state 2 x = mem[0] y = mem[1] goto 1\n")
    assert [d.code for d in r.errors] == [P.MEM_ACCESS]


def test_v1_one_read_and_one_write_is_fine():
    r = parse_program(PAIR + "state 1 when in.valid()\n x = in.read()\n y = mem[0]\n mem[1] = 3\n goto 1\n")
    assert r.errors == []


def test_v2_disconnected_and_doubly_connected_streams():
    r = parse_program(PAIR.replace("w.out <> r.in\n", "") + "state 1 goto 1\n")
    assert [d.code for d in r.errors] == [P.STREAM_CONNECTION, P.STREAM_CONNECTION]
    twice = PAIR.replace("w.out <> r.in", "w.out <> r.in\nw.out <> r.in") + "state 1 goto 1\n"
    r = parse_program(twice)
    assert [d.code for d in r.errors] == [P.STREAM_CONNECTION, P.STREAM_CONNECTION]


def test_v3_unguarded_read_is_a_warning():
    r = parse_program(PAIR + "state 1\n x = in.read()\n goto 1\n")
    assert r.program is not None
    assert [(d.severity, d.code) for d in r.diagnostics] == [(P.WARNING, P.COMM_GUARD)]


def test_v3_unguarded_write_is_a_warning():
    src = PAIR.replace("state 1 when out.ready()", "state 1") + "state 1 when in.valid() x = in.read() goto 1\n"
    r = parse_program(src)
    assert [(d.severity, d.code) for d in r.diagnostics] == [(P.WARNING, P.COMM_GUARD)]


def test_v4_duplicate_target_is_a_warning():
    r = parse_program("val m = Module(M)\nmodule M int x\nstate 1 x = 1 x = 2 goto 1")
    assert r.program is not None
    assert [(d.severity, d.code) for d in r.diagnostics] == [(P.WARNING, P.DUP_TARGET)]


def test_v5_unknown_goto_target():
    r = parse_program("val m = Module(M)\nmodule M int x\nstate 1 goto Mux(x < 1, 1, 7)")
    assert [d.code for d in r.errors] == [P.GOTO_TARGET]
    assert validate_program(A.Program(
        (A.ModuleInstance("m", "M"),), (),
        (A.ModuleDecl("M", (), (A.StateDecl(1, None, (), A.Target(9)),)),),
    ))[0].code == P.GOTO_TARGET


def test_validate_is_deterministic_and_sorted():
    src = PAIR + "state 1\n x = in.read()\n x = 1\n mem[0] = 1\n mem[0] = 2\n goto 5\n"
    p = parse_program(src, )
    assert p.program is None
    prog = P._Parser(P.tokenize(src)[0]).program()
    first = validate_program(prog)
    assert first == validate_program(prog)
    assert [d.location for d in first] == sorted(d.location for d in first)
    assert {d.code for d in first} == {P.COMM_GUARD, P.DUP_TARGET, P.MEM_ACCESS, P.GOTO_TARGET}


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_never_crashes_on_bytes(data):
    r = parse_program(data)
    assert (r.program is None) == any(d.severity == P.ERROR for d in r.diagnostics)


TOKENS = ["val", "m", "=", "Module", "(", "M", ")", "module", "M", "state", "1", "2", "goto",
          "when", "x", ".", "ready", "read", "write", "in", "<>", "[", "]", "+", "<", "Mux", ",",
          "int", "instream", "outstream", "\n"]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(TOKENS), max_size=40))
def test_never_crashes_on_token_soup(toks):
    text = " ".join(toks)
    r = parse_program(text)
    lines = text.count("\n") + 1
    for d in r.diagnostics:
        assert 1 <= d.location.line <= lines
