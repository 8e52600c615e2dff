"""Isomorphism of quad sets up to renaming of blank nodes (and, optionally,
of any other terms the caller marks as relabelable, such as minted UUIDs)."""

from __future__ import annotations

from typing import Callable, Iterable, Optional

import networkx as nx
from networkx.algorithms.isomorphism import DiGraphMatcher

from .store import Quad
from .terms import Blank, Uri


def is_minted(term) -> bool:
    return isinstance(term, Blank) or (isinstance(term, Uri) and term.iri.startswith("urn:uuid:"))


def _as_graph(quads: Iterable[Quad], relabel: Callable) -> nx.DiGraph:
    g = nx.DiGraph()
    for i, q in enumerate(sorted(set(quads), key=Quad.sort_key)):
        node = ("quad", i)
        g.add_node(node, label="#quad")
        for role, term in (("s", q.s), ("p", q.p), ("o", q.o), ("g", q.g)):
            if term not in g:
                g.add_node(term, label=type(term).__name__ if relabel(term) else str(term))
            g.add_edge(node, term, role=role)
    return g


def isomorphic(
    a: Iterable[Quad],
    b: Iterable[Quad],
    relabel: Optional[Callable] = None,
) -> bool:
    """True iff some bijection on relabelable terms maps ``a`` onto ``b``.

    ``relabel`` decides which terms may be renamed; by default only blank
    nodes.  Everything else must match exactly.
    """
    relabel = relabel or (lambda t: isinstance(t, Blank))
    a, b = set(a), set(b)
    if len(a) != len(b):
        return False
    ga, gb = _as_graph(a, relabel), _as_graph(b, relabel)
    if ga.number_of_nodes() != gb.number_of_nodes():
        return False
    matcher = DiGraphMatcher(
        ga,
        gb,
        node_match=lambda x, y: x["label"] == y["label"],
        edge_match=lambda x, y: x["role"] == y["role"],
    )
    return matcher.is_isomorphic()


def find_mapping(a, b, relabel: Optional[Callable] = None) -> Optional[dict]:
    """The term bijection witnessing ``isomorphic(a, b)``, or None."""
    relabel = relabel or (lambda t: isinstance(t, Blank))
    ga, gb = _as_graph(set(a), relabel), _as_graph(set(b), relabel)
    matcher = DiGraphMatcher(
        ga,
        gb,
        node_match=lambda x, y: x["label"] == y["label"],
        edge_match=lambda x, y: x["role"] == y["role"],
    )
    if not matcher.is_isomorphic():
        return None
    return {k: v for k, v in matcher.mapping.items() if not (isinstance(k, tuple) and k[0] == "quad")}
