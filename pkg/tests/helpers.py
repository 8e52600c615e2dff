"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import random
from pathlib import Path

from rdfvm.compiler import compile_api, instantiate, lower_method, materialize, reachable
from rdfvm.neno import parse, parse_expression, typecheck
from rdfvm.sparql import QuadPattern
from rdfvm.store import GraphStore, Quad
from rdfvm.terms import DEFAULT_GRAPH, Blank, Literal, Uri, Variable, XSD, int_literal, string_literal
from rdfvm.vm import program_state, run

DATA = Path(__file__).parent / "data"
PERSON_SRC = (DATA / "Person.neno").read_text()

LANL = "http://www.lanl.gov"
FOAF = "http://xmlns.com/foaf/0.1/"
EX = "http://example.org/"
PREFIXES = {"lanl": LANL, "foaf": FOAF, "ex": EX}

KNOWS = Uri(FOAF + "knows")
NAME = Uri(FOAF + "name")
PERSON = Uri(LANL + "Person")
MARKO = Uri(LANL + "marko")
DR_WH = Uri(LANL + "dr_wh")


def lanl(local: str) -> Uri:
    return Uri(LANL + local)


def ex(local: str) -> Uri:
    return Uri(EX + local)


class Counter:
    """A deterministic URI minter so separate builds produce equal stores."""

    def __init__(self, prefix: str = "urn:test:m"):
        self.prefix = prefix
        self.n = 0

    def __call__(self) -> Uri:
        self.n += 1
        return Uri(f"{self.prefix}{self.n}")


def compile_source(source: str, minter=None):
    checked = typecheck(parse(source))
    api = compile_api(checked, minter=minter) if minter else compile_api(checked)
    return checked, api


def world(source: str = PERSON_SRC, objects=(), minter=None) -> tuple[GraphStore, GraphStore, dict]:
    """A store holding the API graph plus one instance per (uri, class) pair."""
    minter = minter or Counter()
    _, api = compile_source(source, minter)
    store = GraphStore(api.quads())
    inst = {}
    for uri, cls in objects:
        inst[uri] = instantiate(store, api, cls, uri, minter=minter)
    return store, api, inst


def method_chain(source: str, cls: Uri, name: str) -> list:
    checked = typecheck(parse(source))
    decl = next(m for c in checked.unit.classes if c.uri == cls for m in c.methods if m.name == name)
    return [i.describe() for i in reachable(lower_method(decl, {})[0])]


def run_instructions(store: GraphStore, instrs: list, graph: Uri, bindings=None, mode="r-fhat", minter=None, cycles=10_000):
    """Materialize a bare chain into ``graph`` and run it to completion."""
    minter = minter or Counter("urn:test:i")
    uris, quads = materialize(instrs, graph, minter=minter)
    store.add_all(quads)
    state = program_state(store, uris[id(instrs[0])], graph, bindings, uri=minter(), cycles=cycles)
    return run(state, store, mode=mode)


def expression_instructions(text: str):
    return parse_expression(text, PREFIXES)


# -- random data ---------------------------------------------------------------

POOL_S = [MARKO, DR_WH, lanl("josh"), lanl("gary"), Blank("r1")]
POOL_P = [KNOWS, NAME, ex("p")]
POOL_O = POOL_S + [string_literal("marko"), string_literal("gary"), int_literal(7), Literal("x", lang="en")]
POOL_G = [DEFAULT_GRAPH, ex("g1"), ex("g2")]


def random_store(rng: random.Random, max_quads: int = 6) -> GraphStore:
    store = GraphStore()
    for _ in range(rng.randint(0, max_quads)):
        store.insert(Quad(rng.choice(POOL_S), rng.choice(POOL_P), rng.choice(POOL_O), rng.choice(POOL_G)))
    return store


def random_patterns(rng: random.Random, max_patterns: int = 3, store: GraphStore = None) -> list[QuadPattern]:
    """Random BGPs; with a store, most patterns are seeded from its quads."""
    names = ["a", "b", "c"]
    seeds = sorted(store.quads(), key=Quad.sort_key) if store is not None else []

    def pick(pool, var_chance=0.5):
        if rng.random() < var_chance:
            return Variable(rng.choice(names))
        return rng.choice(pool)

    def var_or(term, chance):
        if isinstance(term, Blank) or rng.random() < chance:
            return Variable(rng.choice(names))
        return term

    out = []
    for _ in range(rng.randint(1, max_patterns)):
        if seeds and rng.random() < 0.7:
            q = rng.choice(seeds)
            g = None if rng.random() < 0.5 else var_or(q.g, 0.3)
            out.append(QuadPattern(var_or(q.s, 0.5), var_or(q.p, 0.2), var_or(q.o, 0.5), g))
            continue
        s = pick([t for t in POOL_S if not isinstance(t, Blank)])
        p = pick(POOL_P, 0.3)
        o = pick([t for t in POOL_O if not isinstance(t, Blank)])
        g = None if rng.random() < 0.6 else pick(POOL_G, 0.3)
        out.append(QuadPattern(s, p, o, g))
    return out


def brute_force(store: GraphStore, patterns: list[QuadPattern], projection: list[str]) -> set:
    """Nested loops over every combination of quads, one per pattern."""
    quads = sorted(store.quads(), key=Quad.sort_key)
    found = set()
    for combo in itertools.product(quads, repeat=len(patterns)):
        binding: dict = {}
        ok = True
        for pat, q in zip(patterns, combo):
            for want, got in ((pat.s, q.s), (pat.p, q.p), (pat.o, q.o), (pat.g, q.g)):
                if want is None:
                    continue
                if isinstance(want, Variable):
                    if binding.setdefault(want.name, got) != got:
                        ok = False
                        break
                elif want != got:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            found.add(tuple(binding.get(v) for v in projection))
    return found


def xsd(local: str) -> str:
    return XSD + local
