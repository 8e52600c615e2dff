from dataclasses import replace
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import DATA, MARKO, NAME, PERSON, PERSON_SRC, Counter, compile_source, ex, run_instructions, world
from rdfvm.compiler import Block, Instr, materialize
from rdfvm.iso import isomorphic
from rdfvm.nquads import parse_nquads, serialize_nquads
from rdfvm.store import GraphStore, Quad
from rdfvm.terms import RDF_REST, RDF_TYPE, RVM_NS, XSD, Literal, Uri, bool_literal, double_literal, int_literal, string_literal
from rdfvm.vm import (
    Binding,
    Frame,
    MalformedState,
    OutOfCycles,
    RvmState,
    StackUnderflow,
    canonical,
    create_machine,
    grant,
    load_state,
    program_state,
    run,
    state_quads,
    step,
    store_state,
    value_set,
)

G = ex("prog")


def chain(*instrs):
    for a, b in zip(instrs, instrs[1:]):
        a.next = b
    return list(instrs)


def machine(instrs, store=None, cycles=100, uri=None):
    store = store if store is not None else GraphStore()
    minter = Counter("urn:test:i")
    uris, quads = materialize(instrs, G, minter=minter)
    store.add_all(quads)
    state = program_state(store, uris[id(instrs[0])], G, uri=uri or minter(), cycles=cycles)
    return store, state, uris


# -- single steps --------------------------------------------------------------


def test_multiply_step():
    store, state, _ = machine(chain(Instr("PushValue", int_literal(2)), Instr("PushValue", int_literal(3)), Instr("Multiply")))
    for _ in range(2):
        state = step(state, store)
    assert state.operand_stack == ((int_literal(3),), (int_literal(2),))
    state = step(state, store)
    assert state.operand_stack == ((int_literal(6),),)
    assert state.terminal and state.cycles_remaining == 97


def test_push_double():
    store, state, _ = machine([Instr("PushValue", Literal("2.65", XSD + "double"))])
    state = step(state, store)
    assert state.result == (Literal("2.65", XSD + "double"),)


@pytest.mark.parametrize("flag", [True, False])
def test_branch(flag):
    yes, no = Instr("PushValue", string_literal("yes")), Instr("PushValue", string_literal("no"))
    br = Instr("Branch", on_true=yes, on_false=no)
    store, state, uris = machine([Instr("PushValue", bool_literal(flag), next=br), br, yes, no])
    state = step(step(state, store), store)
    assert state.program_location == uris[id(yes if flag else no)]


def test_mixed_and_integer_arithmetic():
    cases = [
        ("Add", int_literal(2), double_literal(0.5), double_literal(2.5)),
        ("Divide", int_literal(7), int_literal(2), int_literal(3)),
        ("Divide", int_literal(-7), int_literal(2), int_literal(-3)),
        ("Subtract", int_literal(2), int_literal(5), int_literal(-3)),
    ]
    for kind, a, b, want in cases:
        state = run_instructions(GraphStore(), chain(Instr("PushValue", a), Instr("PushValue", b), Instr(kind)), G)
        assert state.result == (want,), kind


def test_division_by_zero_faults():
    state = run_instructions(GraphStore(), chain(Instr("PushValue", int_literal(1)), Instr("PushValue", int_literal(0)), Instr("Divide")), G)
    assert state.fault.startswith("TypeFault") and state.terminal


def test_underflow_faults():
    state = run_instructions(GraphStore(), [Instr("Add")], G)
    assert state.fault.startswith("StackUnderflow")
    with pytest.raises(StackUnderflow):
        store, s, _ = machine([Instr("Add")])
        step(s, store)


def test_arithmetic_on_a_resource_faults():
    state = run_instructions(GraphStore(), chain(Instr("PushValue", MARKO), Instr("PushValue", int_literal(1)), Instr("Add")), G)
    assert state.fault.startswith("TypeFault")


def test_symbols_declare_and_update():
    blk = Block()
    instrs = chain(
        Instr("PushValue", int_literal(1)),
        Instr("Set", symbol="x", block=blk),
        Instr("PushValue", int_literal(2)),
        Instr("SetPlus", symbol="x"),
        Instr("PushValue", int_literal(1)),
        Instr("SetMinus", symbol="x"),
        Instr("Load", symbol="x"),
    )
    state = run_instructions(GraphStore(), instrs, G)
    assert state.result == (int_literal(2),)


def test_unbound_load_faults():
    state = run_instructions(GraphStore(), [Instr("Load", symbol="nope")], G)
    assert state.fault.startswith("TypeFault")


def test_unknown_instruction_faults():
    store = GraphStore([Quad(ex("i1"), RDF_TYPE, ex("Bogus"), G)])
    state = program_state(store, ex("i1"), G, uri=ex("m"))
    assert run(state, store).fault.startswith("TypeFault")


# -- cycles and modes ----------------------------------------------------------


def test_noops_suspend_and_resume():
    instrs = chain(*[Instr("NoOp") for _ in range(10)])
    store, state, uris = machine(instrs, cycles=3)
    state = run(state, store)
    assert state.suspended and state.needs_process
    assert state.program_location == uris[id(instrs[3])]
    assert load_state(store, state.uri) == state
    with pytest.raises(OutOfCycles):
        step(state, store)
    done = run(grant(load_state(store, state.uri), 7), store)
    assert done.terminal and done.cycles_remaining == 0 and not done.needs_process


def _counter_world():
    store, _, _ = world((DATA / "counter.neno").read_text(), [(ex("c"), ex("Counter"))])
    return store


@pytest.mark.parametrize("n", [1, 2, 4])
def test_fhat_and_rfhat_agree(n):
    finals = []
    for mode in ("fhat", "r-fhat"):
        store = _counter_world()
        st0 = create_machine(store, ex("c"), "count", [int_literal(n)], uri=ex("m"), home_graph=ex("machines"))
        final = run(st0, store, mode=mode)
        finals.append((canonical(final), store.quads()))
        assert final.result == (int_literal(2 * n),)
        assert Quad(ex("c"), ex("total"), int_literal(n), ex("c")) in store
    assert finals[0][0] == finals[1][0]
    # Parameter lists use store-minted blank labels, so compare up to renaming.
    assert isomorphic(finals[0][1], finals[1][1])


def test_fhat_reads_its_state_from_the_store():
    # The program asks the store whether the machine itself needs processing.
    uri = ex("self")
    instrs = chain(Instr("PushValue", uri), Instr("TraverseForward", predicate=RVM_NS.needsProcess))
    results = {}
    for mode in ("fhat", "r-fhat"):
        store, state, _ = machine(instrs, uri=uri)
        results[mode] = run(state, store, mode=mode).result
    assert results["fhat"] == (bool_literal(False),)
    assert results["r-fhat"] == ()


def test_unknown_mode():
    store, state, _ = machine([Instr("NoOp")])
    with pytest.raises(ValueError):
        run(state, store, mode="turbo")


# -- fields --------------------------------------------------------------------


def test_cardinality_fault_leaves_store_unchanged():
    src = PERSON_SRC.replace("makeAllEnemies() {", 'rename() {\n    this.foaf:name =+ "b";\n  }\n  makeAllEnemies() {')
    store, _, _ = world(src, [(MARKO, PERSON)])
    store.insert(Quad(MARKO, NAME, string_literal("a"), MARKO))
    before = store.quads()
    final = run(create_machine(store, MARKO, "rename", uri=ex("m"), home_graph=ex("machines")), store)
    assert final.fault.startswith("CardinalityFault")
    assert {q for q in store.quads() if q.g != ex("machines")} == before


def test_setter_replaces_value():
    src = PERSON_SRC.replace("makeAllEnemies() {", 'rename() {\n    this.foaf:name = "b";\n  }\n  makeAllEnemies() {')
    store, _, _ = world(src, [(MARKO, PERSON)])
    store.insert(Quad(MARKO, NAME, string_literal("a"), MARKO))
    final = run(create_machine(store, MARKO, "rename", uri=ex("m")), store)
    assert final.fault is None
    assert store.objects(MARKO, NAME) == [string_literal("b")]


def test_create_machine_errors():
    store, _, _ = world(PERSON_SRC, [(MARKO, PERSON)])
    with pytest.raises(LookupError):
        create_machine(store, MARKO, "fly")
    with pytest.raises(ValueError):
        create_machine(store, MARKO, "makeFriend", [])


@settings(max_examples=60, deadline=None)
@given(st.recursive(st.integers(0, 20).map(str), lambda sub: st.tuples(sub, st.sampled_from("+-*"), sub).map(lambda t: f"({t[0]} {t[1]} {t[2]})"), max_leaves=8))
def test_integer_arithmetic_matches_python(expr):
    src = "prefix ex: <http://example.org/>;\nrdfs:Resource ex:Calc {\n  xsd:int f() { return " + expr + "; }\n}\n"
    store, _, _ = world(src, [(ex("c"), ex("Calc"))])
    final = run(create_machine(store, ex("c"), "f"), store)
    assert final.result == (int_literal(eval(expr)),)


# -- state encoding ------------------------------------------------------------


def _deep_state():
    f = lambda i: Frame(ex(f"method{i}"), (Binding("x", value_set([int_literal(i), MARKO]), ex("blk")), Binding("this", (ex("o"),), ex("blk"))))
    return RvmState(
        uri=ex("m"),
        home_graph=ex("machines"),
        program_location=ex("i7"),
        operand_stack=((int_literal(1),), (), value_set([MARKO, string_literal("x")]), (ex("z"),)),
        return_stack=(ex("r1"), ex("r2"), RVM_NS.halt),
        frame_stack=(f(0), f(1), f(2)),
        cycles_remaining=42,
        needs_process=True,
    )


def test_store_load_round_trip():
    store = GraphStore()
    state = _deep_state()
    store_state(store, state)
    assert load_state(store, state.uri) == state
    assert {q.g for q in store.quads()} == {ex("machines")}


def test_encoding_is_deterministic():
    assert state_quads(_deep_state()) == state_quads(_deep_state())
    text = canonical(_deep_state())
    assert parse_nquads(text) and serialize_nquads(parse_nquads(text)) == text


def test_overwrite_leaves_no_residue():
    store = GraphStore()
    store_state(store, _deep_state())
    small = replace(_deep_state(), operand_stack=(), return_stack=(RVM_NS.halt,), frame_stack=(Frame(ex("m0")),))
    store_state(store, small)
    assert store.quads() == set(state_quads(small))


def test_malformed_state():
    store = GraphStore()
    state = _deep_state()
    store_state(store, state)
    rest = next(q for q in store.quads() if q.p == RDF_REST)
    store.delete(rest)
    with pytest.raises(MalformedState):
        load_state(store, state.uri)
    with pytest.raises(MalformedState):
        load_state(GraphStore(), ex("missing"))
    with pytest.raises(MalformedState):
        store_state(GraphStore(), replace(state, return_stack=()))


def test_bad_cycle_count_is_malformed():
    store = GraphStore()
    store_state(store, _deep_state())
    store.apply(
        inserts=[Quad(ex("m"), RVM_NS.cyclesRemaining, string_literal("many"), ex("machines"))],
        deletes=store.match(ex("m"), RVM_NS.cyclesRemaining),
    )
    with pytest.raises(MalformedState):
        load_state(store, ex("m"))


# -- vocabulary ----------------------------------------------------------------


def test_vocabulary_covers_emitted_terms():
    vocab = parse_nquads(resources.files("rdfvm").joinpath("data/rvm-vocab.nq").read_text())
    declared = {q.s for q in vocab}
    for q in vocab:
        assert q.s.iri.startswith(RVM_NS.base)
        assert vocab and any(v.s == q.s and v.p.iri.endswith("comment") for v in vocab)
    used = set()
    _, api = compile_source((DATA / "script.neno").read_text())
    quads = list(api.quads()) + state_quads(_deep_state())
    for q in quads:
        for t in (q.p, q.o):
            if isinstance(t, Uri) and t.iri.startswith(RVM_NS.base) and t != RVM_NS.halt:
                used.add(t)
    missing = used - declared
    assert not missing, sorted(map(str, missing))
