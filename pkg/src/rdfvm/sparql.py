"""A small SPARQL subset: SELECT/ASK over basic graph patterns, and
INSERT DATA / DELETE DATA / DELETE WHERE.

Patterns outside a ``GRAPH`` block match quads in every named graph.
Solutions come back deduplicated and sorted by the canonical serialization
of the projected terms, so results are reproducible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .nquads import _unescape
from .store import GraphStore, Quad
from .terms import (
    BUILTIN_PREFIXES,
    DEFAULT_GRAPH,
    RDF,
    XSD,
    Blank,
    Literal,
    Uri,
    Variable,
)


class MalformedQuery(ValueError):
    pass


@dataclass(frozen=True)
class QuadPattern:
    s: object
    p: object
    o: object
    g: object = None  # None = any graph

    def variables(self) -> list[str]:
        return [t.name for t in (self.s, self.p, self.o, self.g) if isinstance(t, Variable)]

    def __str__(self) -> str:
        return f"{self.s} {self.p} {self.o}"


@dataclass
class SelectQuery:
    variables: list[str]
    patterns: list[QuadPattern]
    is_ask: bool = False

    def __post_init__(self):
        validate_patterns(self.patterns)
        seen = {v for p in self.patterns for v in p.variables()}
        for v in self.variables:
            if v not in seen:
                raise MalformedQuery(f"projected variable ?{v} does not occur in any pattern")

    def projection(self) -> list[str]:
        if self.variables:
            return list(self.variables)
        out = []
        for p in self.patterns:
            for v in p.variables():
                if v not in out and not v.startswith("_:"):
                    out.append(v)
        return out

    def to_sparql(self) -> str:
        head = "ASK" if self.is_ask else "SELECT " + (" ".join(f"?{v}" for v in self.variables) or "*")
        groups: list[tuple[object, list[QuadPattern]]] = []
        for p in self.patterns:
            if groups and groups[-1][0] == p.g:
                groups[-1][1].append(p)
            else:
                groups.append((p.g, [p]))
        body = []
        for g, pats in groups:
            inner = " . ".join(str(p) for p in pats)
            body.append(inner if g is None else f"GRAPH {g} {{ {inner} }}")
        return f"{head} WHERE {{ {' . '.join(body)} }}"


@dataclass
class InsertData:
    quads: list[Quad]


@dataclass
class DeleteData:
    quads: list[Quad]


@dataclass
class DeleteWhere:
    patterns: list[QuadPattern]

    def __post_init__(self):
        validate_patterns(self.patterns)


UpdateOp = Union[InsertData, DeleteData, DeleteWhere]


def validate_patterns(patterns: Iterable[QuadPattern]) -> None:
    for p in patterns:
        if isinstance(p.s, Literal):
            raise MalformedQuery(f"literal in subject position: {p}")
        if not isinstance(p.p, (Uri, Variable)):
            raise MalformedQuery(f"predicate must be an IRI or variable: {p}")
        if p.g is not None and not isinstance(p.g, (Uri, Variable)):
            raise MalformedQuery(f"graph must be an IRI or variable: {p}")


# -- evaluation ----------------------------------------------------------------


def _resolve(term, binding):
    if isinstance(term, Variable):
        return binding.get(term.name)
    return term


def _bound_count(pattern: QuadPattern, known: set) -> int:
    n = 0
    for t in (pattern.s, pattern.p, pattern.o, pattern.g):
        if t is None:
            continue
        if not isinstance(t, Variable) or t.name in known:
            n += 1
    return n


def _plan(patterns: list[QuadPattern], known: set) -> list[QuadPattern]:
    remaining = list(patterns)
    known = set(known)
    order = []
    while remaining:
        best = max(remaining, key=lambda p: _bound_count(p, known))
        remaining.remove(best)
        order.append(best)
        known.update(best.variables())
    return order


def solutions(store: GraphStore, patterns: list[QuadPattern], initial=None) -> list[dict]:
    """All full bindings (not projected, not deduplicated) of a BGP."""
    rows = [dict(b) for b in (initial if initial is not None else [{}])]
    known = set(rows[0]) if rows else set()
    with store.lock:
        for pat in _plan(patterns, known):
            nxt = []
            for row in rows:
                s = _resolve(pat.s, row)
                p = _resolve(pat.p, row)
                o = _resolve(pat.o, row)
                g = _resolve(pat.g, row) if pat.g is not None else None
                for q in store.match(s, p, o, g):
                    ext = dict(row)
                    ok = True
                    for term, value in ((pat.s, q.s), (pat.p, q.p), (pat.o, q.o), (pat.g, q.g)):
                        if isinstance(term, Variable):
                            prev = ext.get(term.name)
                            if prev is None:
                                ext[term.name] = value
                            elif prev != value:
                                ok = False
                                break
                    if ok:
                        nxt.append(ext)
            rows = nxt
            if not rows:
                break
    return rows


def select(store: GraphStore, query, initial=None, prefixes=None) -> list[dict]:
    """Evaluate a SELECT (or ASK) query; returns a list of var -> Term dicts."""
    if isinstance(query, str):
        query = parse_query(query, prefixes=prefixes)
    rows = solutions(store, query.patterns, initial)
    if query.is_ask:
        return [{}] if rows else []
    proj = query.projection()
    unique = {}
    for row in rows:
        key = tuple(row.get(v) for v in proj)
        unique[key] = key
    ordered = sorted(unique, key=lambda k: tuple(str(t) for t in k))
    return [{v: t for v, t in zip(proj, key) if t is not None} for key in ordered]


def ask(store: GraphStore, query, prefixes=None) -> bool:
    if isinstance(query, str):
        query = parse_query(query, prefixes=prefixes)
    return bool(solutions(store, query.patterns))


def update(store: GraphStore, op, prefixes=None) -> int:
    """Apply one update operation (or a ``;``-separated request); returns quads changed."""
    if isinstance(op, str):
        return sum(update(store, o) for o in parse_update(op, prefixes=prefixes))
    if isinstance(op, InsertData):
        return store.apply(inserts=store.rename_blanks(op.quads))
    if isinstance(op, DeleteData):
        return store.apply(deletes=op.quads)
    if isinstance(op, DeleteWhere):
        with store.lock:
            doomed = set()
            for row in solutions(store, op.patterns):
                for pat in op.patterns:
                    s, p, o = (_resolve(t, row) for t in (pat.s, pat.p, pat.o))
                    g = _resolve(pat.g, row) if pat.g is not None else None
                    doomed.update(store.match(s, p, o, g))
            return store.apply(deletes=doomed)
    raise MalformedQuery(f"unknown update operation {op!r}")


# -- text syntax ---------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\s]*>)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<blank>_:[A-Za-z0-9_]+)
  | (?P<string>"(?:[^"\\\n\r]|\\.)*")
  | (?P<dtmark>\^\^)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<number>[+-]?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+))
  | (?P<pname>[A-Za-z_][A-Za-z0-9_\-]*:[A-Za-z0-9_\-]*(?:\.[A-Za-z0-9_\-]+)*|:[A-Za-z0-9_\-]*)
  | (?P<word>[A-Za-z]+)
  | (?P<punct>[{}.;,*])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"SELECT", "ASK", "WHERE", "PREFIX", "GRAPH", "INSERT", "DELETE", "DATA", "DISTINCT"}


class _Parser:
    def __init__(self, text: str, prefixes: Optional[dict], curie_brackets: bool):
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise MalformedQuery(f"unexpected character {text[pos]!r} at offset {pos}")
            pos = m.end()
            kind = m.lastgroup
            if kind == "ws":
                continue
            value = m.group(0)
            if kind == "word" and value.upper() in _KEYWORDS:
                kind, value = "kw", value.upper()
            self.tokens.append((kind, value))
        self.i = 0
        self.prefixes = dict(BUILTIN_PREFIXES)
        self.prefixes.update(prefixes or {})
        self.curie_brackets = curie_brackets

    def peek(self, offset=0):
        j = self.i + offset
        return self.tokens[j] if j < len(self.tokens) else ("eof", "")

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, kind, value=None):
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise MalformedQuery(f"expected {want!r}, found {tok[1]!r}")
        return tok

    def accept(self, kind, value=None):
        tok = self.peek()
        if tok[0] == kind and (value is None or tok[1] == value):
            self.i += 1
            return True
        return False

    def prologue(self):
        while self.accept("kw", "PREFIX"):
            kind, name = self.next()
            if kind != "pname" or not name.endswith(":"):
                raise MalformedQuery(f"bad prefix name {name!r}")
            _, iri = self.expect("iri")
            self.prefixes[name[:-1]] = iri[1:-1]

    def iri(self, text: str) -> Uri:
        body = _unescape(text[1:-1])
        if self.curie_brackets and ":" in body:
            pfx, local = body.split(":", 1)
            if pfx in self.prefixes and not local.startswith("//"):
                body = self.prefixes[pfx] + local
        try:
            return Uri(body)
        except ValueError as exc:
            raise MalformedQuery(str(exc)) from None

    def pname(self, text: str) -> Uri:
        pfx, local = text.split(":", 1)
        if pfx not in self.prefixes:
            raise MalformedQuery(f"undeclared prefix {pfx!r}")
        return Uri(self.prefixes[pfx] + local)

    def term(self, allow_vars=True):
        kind, value = self.next()
        if kind == "iri":
            return self.iri(value)
        if kind == "pname":
            return self.pname(value)
        if kind == "var":
            if not allow_vars:
                raise MalformedQuery(f"variable {value} not allowed in data")
            return Variable(value[1:])
        if kind == "blank":
            return Blank(value[2:]) if not allow_vars else Variable(value)
        if kind == "string":
            lexical = _unescape(value[1:-1])
            if self.accept("dtmark"):
                kind2, dt = self.next()
                if kind2 == "iri":
                    return Literal(lexical, self.iri(dt).iri)
                if kind2 == "pname":
                    return Literal(lexical, self.pname(dt).iri)
                raise MalformedQuery(f"bad datatype {dt!r}")
            if self.peek()[0] == "lang":
                return Literal(lexical, lang=self.next()[1][1:])
            return Literal(lexical)
        if kind == "number":
            if re.fullmatch(r"[+-]?\d+", value):
                return Literal(value, XSD + "integer")
            if "e" in value.lower():
                return Literal(value, XSD + "double")
            return Literal(value, XSD + "decimal")
        if kind == "word" and value in ("true", "false"):
            return Literal(value, XSD + "boolean")
        if kind == "word" and value == "a":
            return Uri(RDF + "type")
        raise MalformedQuery(f"expected a term, found {value!r}")

    def triples_block(self, graph, allow_vars, out):
        """Parse triples up to (not including) the closing '}'."""
        while True:
            kind, value = self.peek()
            if kind == "punct" and value == "}":
                return
            if kind == "kw" and value == "GRAPH":
                self.next()
                g = self.term(allow_vars)
                if isinstance(g, Literal) or isinstance(g, Blank):
                    raise MalformedQuery("GRAPH needs an IRI or variable")
                self.expect("punct", "{")
                self.triples_block(g, allow_vars, out)
                self.expect("punct", "}")
                self.accept("punct", ".")
                continue
            s = self.term(allow_vars)
            while True:
                p = self.term(allow_vars)
                while True:
                    o = self.term(allow_vars)
                    out.append((s, p, o, graph))
                    if not self.accept("punct", ","):
                        break
                if not self.accept("punct", ";"):
                    break
                if self.peek() in (("punct", "."), ("punct", "}")):
                    break
            if not self.accept("punct", "."):
                if self.peek() != ("punct", "}"):
                    raise MalformedQuery(f"expected '.' or '}}', found {self.peek()[1]!r}")

    def group(self, allow_vars=True):
        self.expect("punct", "{")
        out = []
        self.triples_block(None, allow_vars, out)
        self.expect("punct", "}")
        self.accept("punct", ".")
        return out

    def finish(self):
        if self.peek()[0] != "eof":
            raise MalformedQuery(f"unexpected trailing {self.peek()[1]!r}")


def _patterns(raw) -> list[QuadPattern]:
    pats = [QuadPattern(s, p, o, g) for s, p, o, g in raw]
    validate_patterns(pats)
    return pats


def _data_quads(raw) -> list[Quad]:
    out = []
    for s, p, o, g in raw:
        try:
            out.append(Quad(s, p, o, DEFAULT_GRAPH if g is None else g))
        except ValueError as exc:
            raise MalformedQuery(str(exc)) from None
    return out


def parse_query(text: str, prefixes: Optional[dict] = None, curie_brackets: bool = False) -> SelectQuery:
    """Parse SELECT/ASK text.

    With ``curie_brackets`` an IRI written ``<pfx:local>`` whose prefix is
    known is expanded like a prefixed name.
    """
    ps = _Parser(text, prefixes, curie_brackets)
    ps.prologue()
    if ps.accept("kw", "ASK"):
        ps.accept("kw", "WHERE")
        raw = ps.group()
        ps.finish()
        return SelectQuery([], _patterns(raw), is_ask=True)
    ps.expect("kw", "SELECT")
    ps.accept("kw", "DISTINCT")
    variables = []
    if ps.accept("punct", "*"):
        pass
    else:
        while ps.peek()[0] == "var":
            variables.append(ps.next()[1][1:])
        if not variables:
            raise MalformedQuery("SELECT needs at least one variable or '*'")
    ps.accept("kw", "WHERE")
    raw = ps.group()
    ps.finish()
    return SelectQuery(variables, _patterns(raw))


def parse_update(text: str, prefixes: Optional[dict] = None, curie_brackets: bool = False) -> list[UpdateOp]:
    ps = _Parser(text, prefixes, curie_brackets)
    ops: list[UpdateOp] = []
    while True:
        ps.prologue()
        if ps.peek()[0] == "eof":
            break
        if ps.accept("kw", "INSERT"):
            ps.expect("kw", "DATA")
            ops.append(InsertData(_data_quads(ps.group(allow_vars=False))))
        elif ps.accept("kw", "DELETE"):
            if ps.accept("kw", "DATA"):
                raw = ps.group(allow_vars=False)
                if any(isinstance(t, Blank) for r in raw for t in r):
                    raise MalformedQuery("blank nodes are not allowed in DELETE DATA")
                ops.append(DeleteData(_data_quads(raw)))
            elif ps.accept("kw", "WHERE"):
                ops.append(DeleteWhere(_patterns(ps.group())))
            else:
                # Bare DELETE { ... } with a ground payload reads as DELETE DATA.
                raw = ps.group()
                if any(isinstance(t, Variable) for r in raw for t in r):
                    raise MalformedQuery("DELETE template with variables needs WHERE")
                ops.append(DeleteData(_data_quads(raw)))
        else:
            raise MalformedQuery(f"expected INSERT or DELETE, found {ps.peek()[1]!r}")
        if not ps.accept("punct", ";"):
            break
    ps.finish()
    if not ops:
        raise MalformedQuery("empty update request")
    return ops
