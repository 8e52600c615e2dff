"""N-Quads reading and canonical writing."""

from __future__ import annotations

import os
import re
import tempfile
from typing import Iterable, Optional, Union

from .store import GraphStore, Quad
from .terms import DEFAULT_GRAPH, XSD, Blank, Literal, Uri


class NQuadsSyntaxError(SyntaxError):
    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"line {line}: {message}")
        self.lineno = line
        self.offset = column
        self.line = line


_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}

_IRI = re.compile(r"<([^<>\"{}|^`\\\x00-\x20]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*>")
_BLANK = re.compile(r"_:[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?")
_STRING = re.compile(r'"((?:[^"\\\n\r]|\\[tbnrf"\'\\]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*)"')
_LANG = re.compile(r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*")
_WS = re.compile(r"[ \t]*")


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        nxt = text[i + 1]
        if nxt == "u":
            out.append(chr(int(text[i + 2:i + 6], 16)))
            i += 6
        elif nxt == "U":
            out.append(chr(int(text[i + 2:i + 10], 16)))
            i += 10
        else:
            out.append(_ECHAR[nxt])
            i += 2
    return "".join(out)


class _LineReader:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.pos = 0
        self.lineno = lineno

    def fail(self, message: str):
        raise NQuadsSyntaxError(message, self.lineno, self.pos + 1)

    def skip_ws(self):
        self.pos = _WS.match(self.text, self.pos).end()

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text) or self.text[self.pos] == "#"

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def iri(self) -> Uri:
        m = _IRI.match(self.text, self.pos)
        if not m:
            self.fail("expected IRI")
        self.pos = m.end()
        try:
            return Uri(_unescape(m.group(0)[1:-1]))
        except ValueError as exc:
            self.fail(str(exc))

    def blank(self) -> Blank:
        m = _BLANK.match(self.text, self.pos)
        if not m:
            self.fail("expected blank node label")
        self.pos = m.end()
        return Blank(m.group(0)[2:])

    def literal(self) -> Literal:
        m = _STRING.match(self.text, self.pos)
        if not m:
            self.fail("malformed string literal")
        self.pos = m.end()
        lexical = _unescape(m.group(1))
        if self.text.startswith("^^", self.pos):
            self.pos += 2
            return Literal(lexical, self.iri().iri)
        lm = _LANG.match(self.text, self.pos)
        if lm:
            self.pos = lm.end()
            return Literal(lexical, lang=lm.group(0)[1:])
        return Literal(lexical, XSD + "string")

    def term(self, allowed: str):
        ch = self.peek()
        if ch == "<" and "u" in allowed:
            return self.iri()
        if ch == "_" and "b" in allowed:
            return self.blank()
        if ch == '"' and "l" in allowed:
            return self.literal()
        self.fail(f"unexpected {ch!r}" if ch else "unexpected end of line")


def parse_line(text: str, lineno: int = 1) -> Optional[Quad]:
    """Parse one N-Quads line; returns None for blank/comment lines."""
    r = _LineReader(text, lineno)
    if r.at_end():
        return None
    s = r.term("ub")
    p = r.term("u")
    o = r.term("ubl")
    g = DEFAULT_GRAPH
    if r.peek() in ("<", "_"):
        g = r.term("ub")
        if isinstance(g, Blank):
            r.fail("blank node graph labels are not supported")
    if r.peek() != ".":
        r.fail("expected '.' at end of statement")
    r.pos += 1
    if not r.at_end():
        r.fail("trailing content after '.'")
    return Quad(s, p, o, g)


def parse_nquads(text: str) -> list[Quad]:
    quads = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        q = parse_line(line.rstrip("\r"), lineno)
        if q is not None:
            quads.append(q)
    return quads


def parse_term(text: str):
    """Parse a single term in N-Quads syntax (``<iri>``, ``_:b``, ``"lex"^^<dt>``)."""
    r = _LineReader(text.strip(), 1)
    term = r.term("ubl")
    if not r.at_end():
        r.fail("trailing content after term")
    return term


def serialize_nquads(source: Union[GraphStore, Iterable[Quad]], graph: Optional[Uri] = None) -> str:
    """Canonical N-Quads: one quad per line, sorted by (g, s, p, o)."""
    if isinstance(source, GraphStore):
        quads = source.match(g=graph) if graph is not None else source.quads()
    else:
        quads = [q for q in source if graph is None or q.g == graph]
    ordered = sorted(set(quads), key=Quad.sort_key)
    return "".join(str(q) + "\n" for q in ordered)


def load_store(path) -> GraphStore:
    with open(path, encoding="utf-8") as fh:
        return GraphStore(parse_nquads(fh.read()))


def dump_store(store: GraphStore, path) -> None:
    text = serialize_nquads(store)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rdfvm-", suffix=".nq")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
