"""RDF terms: URIs, literals, blank nodes, and query variables.

Every term has a canonical N-Quads rendering (``str(term)``) which doubles as
the total order used for deterministic query results and serialization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
XSD = "http://www.w3.org/2001/XMLSchema#"
OWL = "http://www.w3.org/2002/07/owl#"
RVM = "http://example.com/rvm#"

BUILTIN_PREFIXES = {
    "rdf": RDF,
    "rdfs": RDFS,
    "xsd": XSD,
    "owl": OWL,
    "rvm": RVM,
}


def _escape_literal(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _escape_iri(text: str) -> str:
    out = []
    for ch in text:
        if ch in '<>"{}|^`\\' or ord(ch) <= 0x20:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


@dataclass(frozen=True, slots=True)
class Uri:
    iri: str

    def __post_init__(self):
        if not isinstance(self.iri, str) or ":" not in self.iri:
            raise ValueError(f"not an absolute IRI: {self.iri!r}")

    def __str__(self) -> str:
        return f"<{_escape_iri(self.iri)}>"

    def __repr__(self) -> str:
        return f"Uri({self.iri!r})"


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: str = XSD + "string"
    lang: Optional[str] = None

    def __post_init__(self):
        if self.lang is not None:
            if self.datatype == XSD + "string":
                object.__setattr__(self, "datatype", RDF + "langString")
            elif self.datatype != RDF + "langString":
                raise ValueError("language tag requires rdf:langString")
            object.__setattr__(self, "lang", self.lang.lower())
        elif self.datatype == RDF + "langString":
            raise ValueError("rdf:langString literal without language tag")

    def __str__(self) -> str:
        body = f'"{_escape_literal(self.lexical)}"'
        if self.lang is not None:
            return f"{body}@{self.lang}"
        if self.datatype == XSD + "string":
            return body
        return f"{body}^^<{_escape_iri(self.datatype)}>"

    def __repr__(self) -> str:
        return f"Literal({str(self)})"


@dataclass(frozen=True, slots=True)
class Blank:
    label: str

    def __str__(self) -> str:
        return f"_:{self.label}"

    def __repr__(self) -> str:
        return f"Blank({self.label!r})"


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"

    def __repr__(self) -> str:
        return f"Variable({self.name!r})"


Term = Union[Uri, Literal, Blank]
PatternTerm = Union[Uri, Literal, Blank, Variable]


def term_key(term) -> str:
    """Sort key: the canonical serialization."""
    return str(term)


def sorted_terms(terms) -> list:
    return sorted(terms, key=str)


class Namespace:
    """Attribute access to IRIs in one namespace: ``RVM_NS.nextInst``."""

    def __init__(self, base: str):
        self._base = base

    def __getattr__(self, name: str) -> Uri:
        if name.startswith("__"):
            raise AttributeError(name)
        return Uri(self._base + name)

    def __getitem__(self, name: str) -> Uri:
        return Uri(self._base + name)

    @property
    def base(self) -> str:
        return self._base


RDF_NS = Namespace(RDF)
RDFS_NS = Namespace(RDFS)
XSD_NS = Namespace(XSD)
OWL_NS = Namespace(OWL)
RVM_NS = Namespace(RVM)

RDF_TYPE = RDF_NS.type
RDF_FIRST = RDF_NS.first
RDF_REST = RDF_NS.rest
RDF_NIL = RDF_NS.nil
DEFAULT_GRAPH = RVM_NS.default

INTEGER_TYPES = frozenset(
    XSD + t
    for t in (
        "int",
        "integer",
        "long",
        "short",
        "byte",
        "nonNegativeInteger",
        "positiveInteger",
        "negativeInteger",
        "nonPositiveInteger",
        "unsignedInt",
        "unsignedLong",
    )
)
FLOAT_TYPES = frozenset(XSD + t for t in ("double", "float", "decimal"))
NUMERIC_TYPES = INTEGER_TYPES | FLOAT_TYPES


def int_literal(value: int) -> Literal:
    """``xsd:int`` while the value fits in 32 bits, ``xsd:integer`` beyond."""
    dt = "int" if -(2**31) <= value < 2**31 else "integer"
    return Literal(str(value), XSD + dt)


def double_literal(value: float) -> Literal:
    return Literal(repr(float(value)), XSD + "double")


def bool_literal(value: bool) -> Literal:
    return Literal("true" if value else "false", XSD + "boolean")


def string_literal(value: str) -> Literal:
    return Literal(value)


def is_numeric(term) -> bool:
    return isinstance(term, Literal) and term.datatype in NUMERIC_TYPES


def numeric_value(term: Literal):
    if term.datatype in INTEGER_TYPES:
        return int(term.lexical.strip())
    return float(term.lexical.strip())


def boolean_value(term) -> Optional[bool]:
    if isinstance(term, Literal) and term.datatype == XSD + "boolean":
        lex = term.lexical.strip()
        if lex in ("true", "1"):
            return True
        if lex in ("false", "0"):
            return False
    return None


def expand_curie(text: str, prefixes: dict) -> Optional[str]:
    """Expand ``pfx:local`` with ``prefixes`` (falling back to the builtins)."""
    if ":" not in text:
        return None
    pfx, local = text.split(":", 1)
    base = prefixes.get(pfx, BUILTIN_PREFIXES.get(pfx))
    if base is None:
        return None
    return base + local


def compact_iri(iri: str, prefixes: dict, local_ok=None) -> Optional[str]:
    """Shortest ``pfx:local`` spelling of ``iri``, if a prefix matches.

    ``local_ok`` may reject local parts the caller's syntax cannot spell.
    """
    best = None
    table = dict(BUILTIN_PREFIXES)
    table.update(prefixes)
    for pfx, base in table.items():
        if base and iri.startswith(base):
            local = iri[len(base):]
            if local_ok is not None and not local_ok(local):
                continue
            if best is None or len(local) < len(best[1]):
                best = (pfx, local)
    if best is None:
        return None
    return f"{best[0]}:{best[1]}"
