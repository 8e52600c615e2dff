import random
import uuid

import pytest

from helpers import (
    DATA,
    KNOWS,
    MARKO,
    NAME,
    PERSON,
    PERSON_SRC,
    PREFIXES,
    compile_source,
    ex,
    lanl,
    method_chain,
    random_store,
    run_instructions,
)
from rdfvm.compiler import (
    API_GRAPH,
    INSTRUCTION_KINDS,
    UnknownClass,
    instantiate,
    lower_path,
    read_list,
    template_chain,
    visible_methods,
)
from rdfvm.iso import find_mapping, is_minted, isomorphic
from rdfvm.neno import parse_expression
from rdfvm.sparql import select
from rdfvm.store import GraphStore, Quad
from rdfvm.terms import OWL, RDF_TYPE, RDFS, RVM_NS, Literal, Uri

CALC_SRC = """prefix ex: <http://example.org/>;
rdfs:Resource ex:Calc {
  calc() { xsd:int x = 1 + (2 * 3); }
  nothing() { }
}
"""


def _kind(store, u):
    return store.value(u, RDF_TYPE).iri[len(RVM_NS.base):]


def test_make_friend_chain():
    assert method_chain(PERSON_SRC, PERSON, "makeFriend") == ["Load p", "Load this", f"SetPlus {KNOWS}", "Return"]


def test_nested_arithmetic_chain():
    chain = method_chain(CALC_SRC, ex("Calc"), "calc")
    assert chain == [
        'PushValue "1"^^<http://www.w3.org/2001/XMLSchema#int>',
        'PushValue "2"^^<http://www.w3.org/2001/XMLSchema#int>',
        'PushValue "3"^^<http://www.w3.org/2001/XMLSchema#int>',
        "Multiply",
        "Add",
        "Set x",
        "Return",
    ]


def test_empty_method_is_a_single_return():
    assert method_chain(CALC_SRC, ex("Calc"), "nothing") == ["Return"]


def test_is_friend_and_clear_chains():
    assert method_chain(PERSON_SRC, PERSON, "isFriend") == ["Load p", "Load this", f"SetQuery {KNOWS}", "Return"]
    assert method_chain(PERSON_SRC, PERSON, "makeAllEnemies") == ["Load this", f"SetClear {KNOWS}", "Return"]


def test_api_graph_contents():
    _, api = compile_source(PERSON_SRC)
    assert api.graphs() == [API_GRAPH]
    assert Quad(PERSON, RDF_TYPE, Uri(OWL + "Class"), API_GRAPH) in api
    assert Quad(PERSON, Uri(RDFS + "subClassOf"), Uri("http://xmlns.com/foaf/0.1/Agent"), API_GRAPH) in api
    templates = api.objects(PERSON, RVM_NS.hasMethod)
    assert len(templates) == 4
    names = sorted(api.value(t, RVM_NS.methodName).lexical for t in templates)
    assert names == ["isFriend", "makeAllEnemies", "makeEnemy", "makeFriend"]
    fields = {api.value(f, RVM_NS.predicate): f for f in api.objects(PERSON, RVM_NS.field)}
    name_field = fields[NAME]
    assert int(api.value(name_field, RVM_NS.minCard).lexical) == 1
    assert int(api.value(name_field, RVM_NS.maxCard).lexical) == 1
    assert api.value(fields[KNOWS], RVM_NS.maxCard) is None


def test_instruction_props_match_kind():
    _, api = compile_source((DATA / "script.neno").read_text())
    instrs = {q.s for q in api.match(None, RDF_TYPE) if q.o.iri[len(RVM_NS.base):] in INSTRUCTION_KINDS}
    assert instrs
    for u in instrs:
        kind = _kind(api, u)
        props = {q.p for q in api.match(u)}
        nexts = api.objects(u, RVM_NS.nextInst)
        assert len(nexts) <= 1
        if kind == "PushValue":
            assert RVM_NS.value in props
        if kind in ("TraverseForward", "TraverseInverse"):
            assert RVM_NS.predicate in props
        if kind == "Invoke":
            assert RVM_NS.invokeMethod in props
        if kind == "Branch":
            assert {RVM_NS.branchTrue, RVM_NS.branchFalse} <= props and not nexts
        if kind == "Return":
            assert not nexts
        if kind == "Load" or kind.startswith("Set"):
            assert (RVM_NS.symbol in props) != (RVM_NS.predicate in props)


def test_method_params_are_ordered():
    src = PERSON_SRC.replace("makeAllEnemies() {", "makeAllEnemies() {\n  }\n  pair(lanl:Person a, xsd:int b) {")
    _, api = compile_source(src)
    (t,) = [t for t in api.objects(PERSON, RVM_NS.hasMethod) if api.value(t, RVM_NS.methodName).lexical == "pair"]
    params = read_list(api, api.value(t, RVM_NS.param))
    assert [api.value(p, RVM_NS.symbol).lexical for p in params] == ["a", "b"]


def test_compile_is_deterministic_up_to_minting():
    _, a = compile_source(PERSON_SRC)
    _, b = compile_source(PERSON_SRC)
    assert a.quads() != b.quads()
    assert isomorphic(a.quads(), b.quads(), relabel=is_minted)


def _method_graph(store, method, graph):
    """Quads describing one method: its node, params and instructions."""
    out, todo, seen = [], [method], set()
    while todo:
        n = todo.pop()
        if n in seen:
            continue
        seen.add(n)
        for q in store.match(n, None, None, graph):
            if q.p in (RVM_NS.template, RVM_NS.invokeMethod, RDF_TYPE):
                out.append(q)
                continue
            out.append(q)
            if is_minted(q.o):
                todo.append(q.o)
    return out


def test_instance_clone_is_isomorphic_to_template():
    _, api = compile_source(PERSON_SRC)
    store = GraphStore(api.quads())
    obj = instantiate(store, api, PERSON, MARKO)
    assert obj.graph == MARKO
    assert Quad(MARKO, RDF_TYPE, PERSON, MARKO) in store
    assert set(obj.methods) == {"makeFriend", "makeEnemy", "makeAllEnemies", "isFriend"}
    assert len(store.match(MARKO, RVM_NS.hasMethod, None, MARKO)) == 4
    for name, t in visible_methods(api, PERSON):
        m = obj.methods[name]
        assert m.iri.startswith("urn:uuid:")
        clone = [Quad(q.s, q.p, q.o, API_GRAPH) for q in _method_graph(store, m, MARKO) if q.p != RVM_NS.template]
        template = _method_graph(api, t, API_GRAPH)
        mapping = find_mapping(template, clone, relabel=is_minted)
        assert mapping is not None, name
        assert mapping[t] == m


def test_instructions_live_in_the_object_graph():
    _, api = compile_source(PERSON_SRC)
    store = GraphStore(api.quads())
    obj = instantiate(store, api, PERSON, MARKO)
    for m in obj.methods.values():
        first = store.value(m, RVM_NS.firstInst)
        assert store.match(first, RDF_TYPE, None, MARKO)


def test_two_instances_are_disjoint():
    _, api = compile_source(PERSON_SRC)
    store = GraphStore(api.quads())
    a = instantiate(store, api, PERSON, lanl("a"))
    b = instantiate(store, api, PERSON, lanl("b"))
    minted = lambda g: {t for q in store.graph_quads(g) for t in (q.s, q.o) if isinstance(t, Uri) and t.iri.startswith("urn:uuid:")}
    templates = set(api.objects(PERSON, RVM_NS.hasMethod))
    assert not (minted(a.graph) - templates) & (minted(b.graph) - templates)
    strip = lambda g, new: {Quad(q.s, q.p, q.o, new) for q in store.graph_quads(g) if q.s != g and q.o != g}
    assert isomorphic(strip(a.graph, ex("x")), strip(b.graph, ex("x")), relabel=is_minted)


def test_minted_uris_are_uuid4():
    _, api = compile_source(PERSON_SRC)
    store = GraphStore(api.quads())
    obj = instantiate(store, api, PERSON)
    assert uuid.UUID(obj.uri.iri[len("urn:uuid:"):]).version == 4


def test_instantiate_unknown_class():
    _, api = compile_source(PERSON_SRC)
    with pytest.raises(UnknownClass):
        instantiate(GraphStore(api.quads()), api, lanl("Robot"))


def test_instantiate_twice_is_refused():
    _, api = compile_source(PERSON_SRC)
    store = GraphStore(api.quads())
    instantiate(store, api, PERSON, MARKO)
    with pytest.raises(ValueError):
        instantiate(store, api, PERSON, MARKO)


def test_api_graph_by_name():
    _, api = compile_source(PERSON_SRC)
    store = GraphStore(api.quads())
    obj = instantiate(store, API_GRAPH, PERSON, MARKO)
    assert len(obj.methods) == 4


def test_loops_compile_to_branch_back_edges():
    _, api = compile_source((DATA / "counter.neno").read_text())
    branches = [q.s for q in api.match(None, RDF_TYPE, RVM_NS.Branch)]
    assert len(branches) == 2  # while and if


# -- path lowering -------------------------------------------------------------


def test_zero_step_path():
    lowered = lower_path(parse_expression("lanl:marko", PREFIXES))
    assert lowered.query is None
    state = run_instructions(GraphStore(), lowered.instructions, ex("prog"))
    assert state.result == (MARKO,)


def test_path_queries():
    dot = lower_path(parse_expression("lanl:marko.foaf:knows.foaf:name", PREFIXES))
    assert dot.chain == [f"PushValue {MARKO}", f"TraverseForward {KNOWS}", f"TraverseForward {NAME}"]
    assert "?x" in dot.query.to_sparql() and dot.query.variables == ["y"]
    inv = lower_path(parse_expression("lanl:marko..foaf:knows", PREFIXES))
    assert inv.chain[1] == f"TraverseInverse {KNOWS}"


def _random_path(rng):
    steps = "".join(rng.choice([".", ".."]) + rng.choice(["foaf:knows", "foaf:name", "ex:p"]) for _ in range(rng.randint(1, 3)))
    return rng.choice(["lanl:marko", "lanl:josh", "lanl:dr_wh"]) + steps


def test_chain_execution_equals_query_on_random_stores():
    rng = random.Random(77)
    mismatches = 0
    for _ in range(300):
        store = random_store(rng)
        text = _random_path(rng)
        lowered = lower_path(parse_expression(text, PREFIXES))
        want = {row["y"] for row in select(store, lowered.query)}
        state = run_instructions(store.copy(), lowered.instructions, ex("prog"))
        mismatches += set(state.result) != want
    assert mismatches == 0


def test_variable_base_uses_initial_bindings():
    e = parse_expression("p.foaf:knows", PREFIXES)
    lowered = lower_path(e)
    store = GraphStore([Quad(MARKO, KNOWS, lanl("josh"))])
    rows = select(store, lowered.query, initial=[{"p": MARKO}])
    assert [r["y"] for r in rows] == [lanl("josh")]
    state = run_instructions(store, lowered.instructions, ex("prog"), bindings={"p": (MARKO,)})
    assert state.result == (lanl("josh"),)


def test_read_list_rejects_broken_chains():
    s = GraphStore([Quad(ex("c1"), Uri("http://www.w3.org/1999/02/22-rdf-syntax-ns#first"), ex("v"))])
    with pytest.raises(ValueError):
        read_list(s, ex("c1"))


def test_template_chain_readout():
    _, api = compile_source(PERSON_SRC)
    (t,) = [t for t in api.objects(PERSON, RVM_NS.hasMethod) if api.value(t, RVM_NS.methodName) == Literal("makeEnemy")]
    assert template_chain(api, t) == ["Load p", "Load this", f"SetMinus {KNOWS}", "Return"]
