"""In-memory named-graph quad store.

Quads are held once in a set and indexed in four orderings (gspo, spog, posg,
ospg) so that any pattern with at least one bound position is answered from
an index.  All mutation goes through :meth:`GraphStore.apply`, which checks
graph quotas before touching anything, so an edit either lands completely or
not at all.
"""

from __future__ import annotations

import threading
import uuid
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .terms import DEFAULT_GRAPH, RVM_NS, Blank, Literal, Term, Uri


class QuotaExceeded(Exception):
    def __init__(self, graph: Uri, limit: int):
        super().__init__(f"graph {graph} would exceed its quota of {limit} triples")
        self.graph = graph
        self.limit = limit


@dataclass(frozen=True, slots=True)
class Quad:
    s: Term
    p: Uri
    o: Term
    g: Uri = DEFAULT_GRAPH

    def __post_init__(self):
        if not isinstance(self.s, (Uri, Blank)):
            raise ValueError(f"subject must be a URI or blank node: {self.s!r}")
        if not isinstance(self.p, Uri):
            raise ValueError(f"predicate must be a URI: {self.p!r}")
        if not isinstance(self.o, (Uri, Blank, Literal)):
            raise ValueError(f"bad object term: {self.o!r}")
        if not isinstance(self.g, Uri):
            raise ValueError(f"graph name must be a URI: {self.g!r}")

    def __str__(self) -> str:
        return f"{self.s} {self.p} {self.o} {self.g} ."

    def sort_key(self) -> tuple:
        return (str(self.g), str(self.s), str(self.p), str(self.o))


def _nested():
    return defaultdict(lambda: defaultdict(lambda: defaultdict(set)))


# Index name -> positions of (s, p, o, g) in key order.
_ORDERS = {
    "gspo": (3, 0, 1, 2),
    "spog": (0, 1, 2, 3),
    "posg": (1, 2, 0, 3),
    "ospg": (2, 0, 1, 3),
}


class GraphStore:
    """A set of quads plus per-graph quota metadata.

    Writers and readers share one re-entrant lock; every public method is
    atomic with respect to every other.
    """

    def __init__(self, quads: Iterable[Quad] = ()):
        self.lock = threading.RLock()
        self._quads: set[Quad] = set()
        self._idx = {name: _nested() for name in _ORDERS}
        self._graph_counts: dict[Uri, int] = defaultdict(int)
        self._quotas: dict[Uri, int] = {}
        for q in quads:
            self._add(q)

    # -- basic container protocol ------------------------------------------------

    def __len__(self) -> int:
        return len(self._quads)

    def __contains__(self, quad: Quad) -> bool:
        return quad in self._quads

    def __iter__(self) -> Iterator[Quad]:
        with self.lock:
            return iter(sorted(self._quads, key=Quad.sort_key))

    def quads(self) -> set[Quad]:
        with self.lock:
            return set(self._quads)

    def graphs(self) -> list[Uri]:
        with self.lock:
            return sorted((g for g, n in self._graph_counts.items() if n), key=str)

    def count(self, graph: Uri) -> int:
        return self._graph_counts.get(graph, 0)

    def graph_quads(self, graph: Uri) -> list[Quad]:
        return sorted(self.match(g=graph), key=Quad.sort_key)

    def copy(self) -> "GraphStore":
        with self.lock:
            other = GraphStore(self._quads)
            other._quotas = dict(self._quotas)
            return other

    # -- blank nodes -------------------------------------------------------------

    def fresh_blank(self) -> Blank:
        with self.lock:
            while True:
                # Random labels stay unique when graphs move between stores.
                b = Blank("b" + uuid.uuid4().hex[:20])
                if not self._idx["spog"].get(b) and not self._idx["ospg"].get(b):
                    return b

    def rename_blanks(self, quads: Iterable[Quad]) -> list[Quad]:
        """Relabel blank nodes in ``quads`` with labels fresh to this store."""
        mapping: dict[Blank, Blank] = {}

        def fix(t):
            if isinstance(t, Blank):
                if t not in mapping:
                    mapping[t] = self.fresh_blank()
                return mapping[t]
            return t

        with self.lock:
            return [Quad(fix(q.s), q.p, fix(q.o), q.g) for q in quads]

    # -- quotas and graph metadata ----------------------------------------------

    def set_quota(self, graph: Uri, limit: Optional[int]) -> None:
        with self.lock:
            if limit is None:
                self._quotas.pop(graph, None)
            else:
                self._quotas[graph] = int(limit)

    def quota(self, graph: Uri) -> Optional[int]:
        return self._quotas.get(graph)

    def spawned_by(self, graph: Uri) -> Optional[Uri]:
        """The parent graph, read from ``<graph> rvm:spawnedBy <parent>`` inside ``graph``."""
        for q in self.match(graph, RVM_NS.spawnedBy, None, graph):
            if isinstance(q.o, Uri):
                return q.o
        return None

    def owner(self, graph: Uri) -> Optional[Uri]:
        for q in self.match(graph, RVM_NS.owner, None, graph):
            if isinstance(q.o, Uri):
                return q.o
        return None

    def spawned_graphs(self, root: Uri) -> list[Uri]:
        """All graphs whose spawnedBy chain reaches ``root`` (excluding ``root``)."""
        with self.lock:
            children = defaultdict(list)
            for q in self.match(None, RVM_NS.spawnedBy, None, None):
                if q.s == q.g and isinstance(q.o, Uri):
                    children[q.o].append(q.g)
            out, todo, seen = [], [root], {root}
            while todo:
                for child in sorted(children[todo.pop()], key=str):
                    if child not in seen:
                        seen.add(child)
                        out.append(child)
                        todo.append(child)
            return out

    # -- mutation ----------------------------------------------------------------

    def _add(self, q: Quad) -> bool:
        if q in self._quads:
            return False
        self._quads.add(q)
        parts = (q.s, q.p, q.o, q.g)
        for name, order in _ORDERS.items():
            a, b, c, d = (parts[i] for i in order)
            self._idx[name][a][b][c].add(d)
        self._graph_counts[q.g] += 1
        return True

    def _remove(self, q: Quad) -> bool:
        if q not in self._quads:
            return False
        self._quads.remove(q)
        parts = (q.s, q.p, q.o, q.g)
        for name, order in _ORDERS.items():
            a, b, c, d = (parts[i] for i in order)
            lvl1 = self._idx[name][a]
            lvl2 = lvl1[b]
            lvl3 = lvl2[c]
            lvl3.discard(d)
            if not lvl3:
                del lvl2[c]
                if not lvl2:
                    del lvl1[b]
                    if not lvl1:
                        del self._idx[name][a]
        self._graph_counts[q.g] -= 1
        if not self._graph_counts[q.g]:
            del self._graph_counts[q.g]
        return True

    def apply(self, inserts: Iterable[Quad] = (), deletes: Iterable[Quad] = ()) -> int:
        """Delete then insert atomically; returns the number of quads changed.

        Raises QuotaExceeded (leaving the store untouched) if any graph would
        end up above its quota.
        """
        keep = set(inserts)
        with self.lock:
            gone = {q for q in deletes if q in self._quads and q not in keep}
            new = {q for q in keep if q not in self._quads}
            if self._quotas:
                delta: dict[Uri, int] = defaultdict(int)
                for q in gone:
                    delta[q.g] -= 1
                for q in new:
                    delta[q.g] += 1
                for g, d in delta.items():
                    limit = self._quotas.get(g)
                    if limit is not None and d > 0 and self.count(g) + d > limit:
                        raise QuotaExceeded(g, limit)
            for q in gone:
                self._remove(q)
            for q in new:
                self._add(q)
            return len(gone) + len(new)

    def insert(self, quad: Quad) -> None:
        self.apply(inserts=[quad])

    def add_all(self, quads: Iterable[Quad]) -> int:
        return self.apply(inserts=quads)

    def delete(self, quad: Quad) -> bool:
        return bool(self.apply(deletes=[quad]))

    def compare_and_set(self, old: Quad, new: Quad) -> bool:
        """Replace ``old`` with ``new`` iff ``old`` is present; atomic."""
        with self.lock:
            if old not in self._quads:
                return False
            self.apply(inserts=[new], deletes=[old])
            return True

    def drop_graph(self, graph: Uri) -> int:
        with self.lock:
            return self.apply(deletes=self.match(g=graph))

    # -- lookup ------------------------------------------------------------------

    def match(self, s=None, p=None, o=None, g=None) -> list[Quad]:
        """All quads matching the pattern; ``None`` is a wildcard."""
        # A term that cannot occupy its position matches nothing.
        if (
            (s is not None and not isinstance(s, (Uri, Blank)))
            or (p is not None and not isinstance(p, Uri))
            or (g is not None and not isinstance(g, Uri))
        ):
            return []
        with self.lock:
            if s is not None and p is not None and o is not None and g is not None:
                q = Quad(s, p, o, g)
                return [q] if q in self._quads else []
            if s is not None:
                return self._scan("spog", (s, p, o, g), (s, p, o), g)
            if p is not None:
                return self._scan("posg", (s, p, o, g), (p, o), g)
            if o is not None:
                return self._scan("ospg", (s, p, o, g), (o,), g)
            if g is not None:
                return self._scan("gspo", (s, p, o, g), (g,), None)
            return list(self._quads)

    def _scan(self, name, pattern, prefix, final_filter) -> list[Quad]:
        order = _ORDERS[name]
        node = self._idx[name]
        bound = []
        for value in prefix:
            if value is None:
                break
            node = node.get(value)
            if node is None:
                return []
            bound.append(value)
        out = []
        depth = len(bound)

        def walk(level, tree, acc):
            if level == 3:
                for leaf in tree:
                    yield acc + [leaf]
                return
            for key, sub in tree.items():
                yield from walk(level + 1, sub, acc + [key])

        for keys in walk(depth, node, bound):
            parts = [None] * 4
            for pos, val in zip(order, keys):
                parts[pos] = val
            if any(want is not None and want != got for want, got in zip(pattern, parts)):
                continue
            out.append(Quad(*parts))
        return out

    def objects(self, s, p, g=None) -> list:
        return [q.o for q in self.match(s, p, None, g)]

    def value(self, s, p, g=None):
        """The single object of ``(s, p)``, or None.  Ties resolve canonically."""
        found = self.objects(s, p, g)
        if not found:
            return None
        return min(found, key=str)

    def check_indexes(self) -> bool:
        """True iff every index agrees with the quad set."""
        with self.lock:
            for name, order in _ORDERS.items():
                seen = set()
                for a, l1 in self._idx[name].items():
                    for b, l2 in l1.items():
                        for c, l3 in l2.items():
                            for d in l3:
                                parts = [None] * 4
                                for pos, val in zip(order, (a, b, c, d)):
                                    parts[pos] = val
                                seen.add(Quad(*parts))
                if seen != self._quads:
                    return False
            return True
