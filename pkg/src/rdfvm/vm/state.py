"""Machine state and its RDF encoding.

Stacks are stored as rdf:List chains hanging off the machine URI inside its
home graph.  Cell labels are derived from a hash of the machine URI and the
cell's position, so encoding the same state twice yields the same quads and
successive checkpoints differ only where the state changed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from ..nquads import serialize_nquads
from ..store import GraphStore, Quad
from ..terms import (
    INTEGER_TYPES,
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    RVM_NS,
    XSD,
    Blank,
    Literal,
    Uri,
    bool_literal,
    boolean_value,
    string_literal,
)

STATE_PREDICATES = (
    RVM_NS.programLocation,
    RVM_NS.operandStack,
    RVM_NS.returnStack,
    RVM_NS.frameStack,
    RVM_NS.needsProcess,
    RVM_NS.cyclesRemaining,
    RVM_NS.fault,
)


class MalformedState(ValueError):
    pass


def value_set(terms: Iterable) -> tuple:
    """Canonical ValueSet: distinct terms ordered by serialization."""
    return tuple(sorted(set(terms), key=str))


@dataclass(frozen=True)
class Binding:
    symbol: str
    values: tuple
    block: Uri


@dataclass(frozen=True)
class Frame:
    method: Uri
    bindings: tuple = ()  # newest first, so inner declarations shadow outer ones

    def lookup(self, symbol: str) -> Optional[Binding]:
        for b in self.bindings:
            if b.symbol == symbol:
                return b
        return None

    def declare(self, symbol: str, values, block: Uri) -> "Frame":
        return replace(self, bindings=(Binding(symbol, value_set(values), block),) + self.bindings)

    def assign(self, symbol: str, values) -> Optional["Frame"]:
        for i, b in enumerate(self.bindings):
            if b.symbol == symbol:
                nb = replace(b, values=value_set(values))
                return replace(self, bindings=self.bindings[:i] + (nb,) + self.bindings[i + 1 :])
        return None

    def drop_block(self, block: Uri) -> "Frame":
        return replace(self, bindings=tuple(b for b in self.bindings if b.block != block))


@dataclass(frozen=True)
class RvmState:
    uri: Uri
    home_graph: Uri
    program_location: Optional[Uri]
    operand_stack: tuple = ()  # of ValueSet tuples, top first
    return_stack: tuple = ()  # of Uri, top first
    frame_stack: tuple = ()  # of Frame, top first
    cycles_remaining: int = 0
    needs_process: bool = False
    fault: Optional[str] = None

    @property
    def terminal(self) -> bool:
        return self.program_location is None

    @property
    def suspended(self) -> bool:
        return self.program_location is not None and self.cycles_remaining <= 0

    @property
    def frame(self) -> Optional[Frame]:
        return self.frame_stack[0] if self.frame_stack else None

    def binding(self, symbol: str) -> Optional[tuple]:
        f = self.frame
        b = f.lookup(symbol) if f is not None else None
        return b.values if b is not None else None

    @property
    def result(self) -> Optional[tuple]:
        return self.operand_stack[0] if self.operand_stack else None


def grant(state: RvmState, cycles: int) -> RvmState:
    """Top up the cycle budget, e.g. before resuming a suspended machine."""
    return replace(state, cycles_remaining=state.cycles_remaining + int(cycles))


# -- encoding ------------------------------------------------------------------


def _prefix(uri: Uri) -> str:
    return "s" + hashlib.sha1(uri.iri.encode("utf-8")).hexdigest()[:16]


def state_quads(state: RvmState) -> list[Quad]:
    g = state.home_graph
    pre = _prefix(state.uri)
    out: list[Quad] = []

    def add(s, p, o):
        out.append(Quad(s, p, o, g))

    def chain(tag: str, items: list) -> object:
        head: object = RDF_NIL
        for i in range(len(items) - 1, -1, -1):
            cell = Blank(f"{pre}{tag}{i}")
            add(cell, RDF_FIRST, items[i])
            add(cell, RDF_REST, head)
            head = cell
        return head

    u = state.uri
    add(u, RDF_TYPE, RVM_NS.RVM)
    if state.program_location is not None:
        add(u, RVM_NS.programLocation, state.program_location)
    operands = []
    for i, vs in enumerate(state.operand_stack):
        if len(vs) == 1:
            operands.append(vs[0])
        else:
            node = Blank(f"{pre}v{i}")
            add(node, RDF_TYPE, RVM_NS.ValueSet)
            for t in vs:
                add(node, RVM_NS.member, t)
            operands.append(node)
    add(u, RVM_NS.operandStack, chain("o", operands))
    add(u, RVM_NS.returnStack, chain("r", list(state.return_stack)))
    frames = []
    for i, f in enumerate(state.frame_stack):
        node = Blank(f"{pre}f{i}")
        add(node, RDF_TYPE, RVM_NS.Frame)
        add(node, RVM_NS.method, f.method)
        nodes = []
        for j, b in enumerate(f.bindings):
            bn = Blank(f"{pre}f{i}b{j}")
            add(bn, RDF_TYPE, RVM_NS.Binding)
            add(bn, RVM_NS.hasSymbol, string_literal(b.symbol))
            for t in b.values:
                add(bn, RVM_NS.hasValue, t)
            add(bn, RVM_NS.fromBlock, b.block)
            nodes.append(bn)
        add(node, RVM_NS.bindings, chain(f"f{i}c", nodes))
        frames.append(node)
    add(u, RVM_NS.frameStack, chain("f", frames))
    add(u, RVM_NS.needsProcess, bool_literal(state.needs_process))
    add(u, RVM_NS.cyclesRemaining, Literal(str(state.cycles_remaining), XSD + "integer"))
    if state.fault is not None:
        add(u, RVM_NS.fault, string_literal(state.fault))
    return out


def canonical(state: RvmState) -> str:
    """Canonical N-Quads text of a state; equal states give equal text."""
    return serialize_nquads(state_quads(state))


def _stored_quads(store: GraphStore, uri: Uri, graph: Uri) -> list[Quad]:
    """Quads currently encoding machine ``uri`` in ``graph``."""
    pre = _prefix(uri)
    out = list(store.match(uri, RDF_TYPE, RVM_NS.RVM, graph))
    todo = []
    for p in STATE_PREDICATES:
        for q in store.match(uri, p, None, graph):
            out.append(q)
            todo.append(q.o)
    seen = set()
    while todo:
        node = todo.pop()
        if not isinstance(node, Blank) or not node.label.startswith(pre) or node in seen:
            continue
        seen.add(node)
        for q in store.match(node, None, None, graph):
            out.append(q)
            todo.append(q.o)
    return out


def home_graph_of(store: GraphStore, uri: Uri) -> Optional[Uri]:
    graphs = sorted({q.g for q in store.match(uri, RDF_TYPE, RVM_NS.RVM, None)}, key=str)
    return graphs[0] if len(graphs) == 1 else None


def store_state(store: GraphStore, state: RvmState) -> None:
    """Replace the stored encoding of ``state.uri`` with ``state``, atomically."""
    if len(state.return_stack) != len(state.frame_stack):
        raise MalformedState("return stack and frame stack depths differ")
    with store.lock:
        old = []
        for g in {q.g for q in store.match(state.uri, RDF_TYPE, RVM_NS.RVM, None)} | {state.home_graph}:
            old.extend(_stored_quads(store, state.uri, g))
        store.apply(inserts=state_quads(state), deletes=old)


def discard_state(store: GraphStore, uri: Uri) -> int:
    """Remove a machine's encoding from the store; returns quads removed."""
    with store.lock:
        old = []
        for g in {q.g for q in store.match(uri, RDF_TYPE, RVM_NS.RVM, None)}:
            old.extend(_stored_quads(store, uri, g))
        return store.apply(deletes=old)


def _one(store, s, p, g, required=True):
    found = store.objects(s, p, g)
    if len(found) > 1:
        raise MalformedState(f"{s} has {len(found)} values for {p}")
    if not found:
        if required:
            raise MalformedState(f"{s} is missing {p}")
        return None
    return found[0]


def _list(store, head, g) -> list:
    out, seen = [], set()
    while head != RDF_NIL:
        if not isinstance(head, Blank) or head in seen:
            raise MalformedState(f"broken rdf:List at {head}")
        seen.add(head)
        out.append(_one(store, head, RDF_FIRST, g))
        head = _one(store, head, RDF_REST, g)
    return out


def load_state(store: GraphStore, uri: Uri) -> RvmState:
    """Decode machine ``uri`` from the store; raises MalformedState."""
    with store.lock:
        g = home_graph_of(store, uri)
        if g is None:
            raise MalformedState(f"{uri} is not typed rvm:RVM in exactly one graph")
        loc = _one(store, uri, RVM_NS.programLocation, g, required=False)
        if loc is not None and not isinstance(loc, Uri):
            raise MalformedState("programLocation must be a URI")
        operands = []
        for item in _list(store, _one(store, uri, RVM_NS.operandStack, g), g):
            if isinstance(item, Blank) and store.match(item, RDF_TYPE, RVM_NS.ValueSet, g):
                operands.append(value_set(store.objects(item, RVM_NS.member, g)))
            else:
                operands.append((item,))
        returns = _list(store, _one(store, uri, RVM_NS.returnStack, g), g)
        if not all(isinstance(r, Uri) for r in returns):
            raise MalformedState("return stack entries must be URIs")
        frames = []
        for node in _list(store, _one(store, uri, RVM_NS.frameStack, g), g):
            method = _one(store, node, RVM_NS.method, g)
            bindings = []
            for bn in _list(store, _one(store, node, RVM_NS.bindings, g), g):
                sym = _one(store, bn, RVM_NS.hasSymbol, g)
                block = _one(store, bn, RVM_NS.fromBlock, g)
                if not isinstance(sym, Literal):
                    raise MalformedState("hasSymbol must be a literal")
                bindings.append(Binding(sym.lexical, value_set(store.objects(bn, RVM_NS.hasValue, g)), block))
            frames.append(Frame(method, tuple(bindings)))
        if len(returns) != len(frames):
            raise MalformedState("return stack and frame stack depths differ")
        flag = boolean_value(_one(store, uri, RVM_NS.needsProcess, g))
        if flag is None:
            raise MalformedState("needsProcess must be an xsd:boolean")
        cycles = _one(store, uri, RVM_NS.cyclesRemaining, g)
        if not isinstance(cycles, Literal) or cycles.datatype not in INTEGER_TYPES:
            raise MalformedState("cyclesRemaining must be an integer")
        try:
            budget = int(cycles.lexical)
        except ValueError:
            raise MalformedState(f"bad cyclesRemaining {cycles.lexical!r}") from None
        if budget < 0:
            raise MalformedState("cyclesRemaining is negative")
        fault = _one(store, uri, RVM_NS.fault, g, required=False)
        return RvmState(
            uri=uri,
            home_graph=g,
            program_location=loc,
            operand_stack=tuple(operands),
            return_stack=tuple(returns),
            frame_stack=tuple(frames),
            cycles_remaining=budget,
            needs_process=flag,
            fault=fault.lexical if isinstance(fault, Literal) else None,
        )
