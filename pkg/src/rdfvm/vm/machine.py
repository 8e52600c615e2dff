"""The interpreter: one RDF-encoded instruction per ``step``.

Instructions are always read from the store, so edits to an instruction
graph made by a running program take effect at the next step.  ``run`` in
``fhat`` mode also reloads and re-stores the machine state around every
step; ``r-fhat`` keeps the state in memory and writes it only on exit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from ..compiler import HALT, read_list, uuid_minter
from ..store import GraphStore, Quad, QuotaExceeded
from ..terms import (
    INTEGER_TYPES,
    RDF_TYPE,
    DEFAULT_GRAPH,
    RDFS,
    RVM_NS,
    Blank,
    Literal,
    Uri,
    bool_literal,
    boolean_value,
    double_literal,
    int_literal,
    is_numeric,
    numeric_value,
)
from .state import (
    Frame,
    MalformedState,
    RvmState,
    discard_state,
    load_state,
    store_state,
    value_set,
)

log = logging.getLogger(__name__)

DEFAULT_CYCLES = 100_000
MODES = ("fhat", "r-fhat")

# Guard(state, graph, action) -> bool, action in {"read", "write", "delete"}
Guard = Callable[[RvmState, Uri, str], bool]


class Fault(Exception):
    """A runtime error that stops the machine; recorded as ``rvm:fault``."""

    code = "Fault"

    def __init__(self, message: str = ""):
        super().__init__(f"{self.code}: {message}" if message else self.code)
        self.message = message


class StackUnderflow(Fault):
    code = "StackUnderflow"


class TypeFault(Fault):
    code = "TypeFault"


class CardinalityFault(Fault):
    code = "CardinalityFault"


class PermissionDenied(Fault):
    code = "PermissionDenied"


class QuotaFault(Fault):
    code = "QuotaExceeded"


class StateFault(Fault):
    code = "MalformedState"


class OutOfCycles(Exception):
    pass


@dataclass(frozen=True)
class Instruction:
    uri: Uri
    kind: str
    value: object = None
    symbol: Optional[str] = None
    predicate: Optional[Uri] = None
    invoke: Optional[Uri] = None
    next: Optional[Uri] = None
    on_true: Optional[Uri] = None
    on_false: Optional[Uri] = None
    block: Optional[Uri] = None
    returns_value: bool = False


_KINDS = {
    "PushValue", "Load", "Add", "Subtract", "Multiply", "Divide", "Set", "SetPlus", "SetMinus",
    "SetClear", "SetQuery", "TraverseForward", "TraverseInverse", "Invoke", "Return", "Branch", "NoOp",
}


def _single(store, s, p, what):
    found = store.objects(s, p)
    if len(set(found)) > 1:
        raise TypeFault(f"instruction {s} has several {what}")
    return found[0] if found else None


def read_instruction(store: GraphStore, uri: Uri) -> Instruction:
    kinds = [t.iri[len(RVM_NS.base):] for t in store.objects(uri, RDF_TYPE) if isinstance(t, Uri) and t.iri.startswith(RVM_NS.base)]
    kinds = sorted(set(k for k in kinds if k in _KINDS))
    if len(kinds) != 1:
        raise TypeFault(f"{uri} is not a single known instruction")
    sym = _single(store, uri, RVM_NS.symbol, "symbols")
    rv = _single(store, uri, RVM_NS.returnsValue, "returnsValue flags")
    return Instruction(
        uri=uri,
        kind=kinds[0],
        value=_single(store, uri, RVM_NS.value, "values"),
        symbol=sym.lexical if isinstance(sym, Literal) else None,
        predicate=_single(store, uri, RVM_NS.predicate, "predicates"),
        invoke=_single(store, uri, RVM_NS.invokeMethod, "targets"),
        next=_single(store, uri, RVM_NS.nextInst, "successors"),
        on_true=_single(store, uri, RVM_NS.branchTrue, "true branches"),
        on_false=_single(store, uri, RVM_NS.branchFalse, "false branches"),
        block=_single(store, uri, RVM_NS.fromBlock, "blocks"),
        returns_value=bool(boolean_value(rv)) if rv is not None else False,
    )


# -- helpers used by step -------------------------------------------------------


class _Work:
    """Mutable scratch copy of the stacks for a single step."""

    def __init__(self, state: RvmState):
        self.state = state
        self.operands = list(state.operand_stack)
        self.returns = list(state.return_stack)
        self.frames = list(state.frame_stack)
        self.location = state.program_location

    def pop(self) -> tuple:
        if not self.operands:
            raise StackUnderflow("operand stack is empty")
        return self.operands.pop(0)

    def push(self, values) -> None:
        self.operands.insert(0, value_set(values))

    def frame(self) -> Frame:
        if not self.frames:
            raise StackUnderflow("no active frame")
        return self.frames[0]

    def finish(self) -> RvmState:
        return replace(
            self.state,
            program_location=self.location,
            operand_stack=tuple(self.operands),
            return_stack=tuple(self.returns),
            frame_stack=tuple(self.frames),
            cycles_remaining=self.state.cycles_remaining - 1,
        )


def _scalar(vs: tuple, what: str):
    if len(vs) != 1:
        raise TypeFault(f"{what} needs a single value, got {len(vs)}")
    return vs[0]


def _number(vs: tuple):
    t = _scalar(vs, "arithmetic")
    if not is_numeric(t):
        raise TypeFault(f"non-numeric operand {t}")
    try:
        return numeric_value(t), t.datatype in INTEGER_TYPES
    except ValueError:
        raise TypeFault(f"malformed number {t}") from None


def _arith(kind: str, a: tuple, b: tuple) -> Literal:
    x, xi = _number(a)
    y, yi = _number(b)
    if kind == "Add":
        r = x + y
    elif kind == "Subtract":
        r = x - y
    elif kind == "Multiply":
        r = x * y
    else:
        if y == 0:
            raise TypeFault("division by zero")
        if xi and yi:
            r = abs(x) // abs(y)
            if (x < 0) != (y < 0):
                r = -r
        else:
            r = x / y
    if xi and yi:
        return int_literal(int(r))
    return double_literal(float(r))


def _resources(vs: tuple, what: str) -> list:
    for t in vs:
        if not isinstance(t, (Uri, Blank)):
            raise TypeFault(f"{what} must be resources, got {t}")
    return list(vs)


def receiver_graph(store: GraphStore, r, home: Uri) -> Uri:
    """The graph holding ``r``'s type triple (preferring ``home``), else ``home``."""
    graphs = {q.g for q in store.match(r, RDF_TYPE, None, None)}
    if not graphs or home in graphs:
        return home
    return min(graphs, key=str)


def cardinality(store: GraphStore, r, predicate: Uri) -> tuple:
    """(min, max) for ``predicate`` on ``r`` from field declarations in the store."""
    lo, hi = 0, None
    sub = Uri(RDFS + "subClassOf")
    todo = list(store.objects(r, RDF_TYPE))
    seen = set()
    while todo:
        c = todo.pop()
        if c in seen or not isinstance(c, (Uri, Blank)):
            continue
        seen.add(c)
        todo.extend(store.objects(c, sub))
        for f in store.objects(c, RVM_NS.field):
            if predicate not in store.objects(f, RVM_NS.predicate):
                continue
            for m in store.objects(f, RVM_NS.minCard):
                if is_numeric(m):
                    lo = max(lo, int(numeric_value(m)))
            for m in store.objects(f, RVM_NS.maxCard):
                if is_numeric(m):
                    v = int(numeric_value(m))
                    hi = v if hi is None else min(hi, v)
    return lo, hi


def resolve_method(store: GraphStore, receiver, target: Uri) -> Uri:
    """The method of ``receiver`` that an Invoke naming ``target`` should run."""
    methods = sorted(set(store.objects(receiver, RVM_NS.hasMethod)), key=str)
    if target in methods:
        return target
    for m in methods:
        if target in store.objects(m, RVM_NS.template):
            return m
    names = {n for n in store.objects(target, RVM_NS.methodName) if isinstance(n, Literal)}
    for m in methods:
        if names & set(store.objects(m, RVM_NS.methodName)):
            return m
    raise TypeFault(f"{receiver} has no method matching {target}")


def method_by_name(store: GraphStore, receiver, name: str) -> Optional[Uri]:
    for m in sorted(set(store.objects(receiver, RVM_NS.hasMethod)), key=str):
        if any(isinstance(n, Literal) and n.lexical == name for n in store.objects(m, RVM_NS.methodName)):
            return m
    return None


def method_params(store: GraphStore, method: Uri) -> list[str]:
    head = store.value(method, RVM_NS.param)
    if head is None:
        return []
    try:
        nodes = read_list(store, head)
    except ValueError as e:
        raise TypeFault(str(e)) from None
    out = []
    for n in nodes:
        sym = store.value(n, RVM_NS.symbol)
        if not isinstance(sym, Literal):
            raise TypeFault(f"parameter of {method} has no symbol")
        out.append(sym.lexical)
    return out


def _frame_for(store, method: Uri, receiver, args: Sequence[tuple]) -> Frame:
    params = method_params(store, method)
    if len(params) != len(args):
        raise TypeFault(f"{method} takes {len(params)} argument(s), {len(args)} given")
    frame = Frame(method).declare("this", (receiver,), method)
    for name, vs in zip(params, args):
        frame = frame.declare(name, vs, method)
    return frame


# -- step ----------------------------------------------------------------------


def step(state: RvmState, store: GraphStore, guard: Optional[Guard] = None) -> RvmState:
    """Execute exactly one instruction and return the successor state.

    Raises a :class:`Fault` subclass on runtime errors and OutOfCycles when
    the budget is spent.  Store edits made by the instruction are atomic.
    """
    if state.program_location is None:
        raise ValueError("machine is terminal")
    if state.cycles_remaining <= 0:
        raise OutOfCycles(str(state.uri))
    ins = read_instruction(store, state.program_location)
    w = _Work(state)
    w.location = ins.next
    k = ins.kind

    if k == "PushValue":
        if ins.value is None:
            raise TypeFault("PushValue without a value")
        w.push((ins.value,))
    elif k == "Load":
        b = w.frame().lookup(ins.symbol) if ins.symbol is not None else None
        if b is None:
            raise TypeFault(f"unbound symbol {ins.symbol!r}")
        w.operands.insert(0, b.values)
    elif k in ("Add", "Subtract", "Multiply", "Divide"):
        b = w.pop()
        a = w.pop()
        w.push((_arith(k, a, b),))
    elif k in ("TraverseForward", "TraverseInverse"):
        if ins.predicate is None:
            raise TypeFault(f"{k} without a predicate")
        src = w.pop()
        if k == "TraverseForward":
            out = {q.o for s in src if isinstance(s, (Uri, Blank)) for q in store.match(s, ins.predicate)}
        else:
            out = {q.s for o in src for q in store.match(None, ins.predicate, o)}
        w.push(out)
    elif k in ("Set", "SetPlus", "SetMinus", "SetClear", "SetQuery"):
        if (ins.symbol is None) == (ins.predicate is None):
            raise TypeFault(f"{k} needs exactly one of symbol or predicate")
        if ins.symbol is not None:
            _set_symbol(w, ins)
        else:
            _set_field(w, ins, store, guard)
    elif k == "Branch":
        flag = boolean_value(_scalar(w.pop(), "Branch"))
        if flag is None:
            raise TypeFault("Branch needs an xsd:boolean")
        w.location = ins.on_true if flag else ins.on_false
        if w.location is None:
            raise TypeFault("Branch target missing")
    elif k == "Invoke":
        _invoke(w, ins, store)
    elif k == "Return":
        _return(w, ins)
    elif k == "NoOp":
        if ins.block is not None and w.frames:
            w.frames[0] = w.frames[0].drop_block(ins.block)
    return w.finish()


def _set_symbol(w: _Work, ins: Instruction):
    k, sym = ins.kind, ins.symbol
    if k == "Set" and sym == "_":
        w.pop()
        return
    frame = w.frame()
    values = () if k == "SetClear" else w.pop()
    if k == "SetQuery":
        b = frame.lookup(sym)
        if b is None:
            raise TypeFault(f"unbound symbol {sym!r}")
        w.push((bool_literal(bool(values) and set(values) <= set(b.values)),))
        return
    if ins.block is not None and k in ("Set", "SetClear"):
        w.frames[0] = frame.declare(sym, values, ins.block)
        return
    b = frame.lookup(sym)
    if b is None:
        raise TypeFault(f"unbound symbol {sym!r}")
    if k == "SetPlus":
        values = set(b.values) | set(values)
    elif k == "SetMinus":
        values = set(b.values) - set(values)
    w.frames[0] = frame.assign(sym, values)


def _set_field(w: _Work, ins: Instruction, store: GraphStore, guard: Optional[Guard]):
    k, p = ins.kind, ins.predicate
    receivers = _resources(w.pop(), "field receivers")
    values = () if k == "SetClear" else w.pop()
    if k == "SetQuery":
        ok = bool(receivers) and bool(values) and all(
            set(values) <= {q.o for q in store.match(r, p)} for r in receivers
        )
        w.push((bool_literal(ok),))
        return
    state = w.state
    inserts, deletes = [], []
    with store.lock:
        for r in receivers:
            existing = store.match(r, p)
            before = {q.o for q in existing}
            if k == "SetPlus":
                add, drop = set(values) - before, []
            elif k == "SetMinus":
                add, drop = set(), [q for q in existing if q.o in values]
            elif k == "SetClear":
                add, drop = set(), list(existing)
            else:
                add, drop = set(values) - before, [q for q in existing if q.o not in values]
            if not add and not drop:
                continue
            after = (before | add) - {q.o for q in drop}
            lo, hi = cardinality(store, r, p)
            if add and hi is not None and len(after) > hi:
                raise CardinalityFault(f"{r} {p} would have {len(after)} values (max {hi})")
            if drop and len(after) < lo and len(after) < len(before):
                raise CardinalityFault(f"{r} {p} would have {len(after)} values (min {lo})")
            if add:
                g = receiver_graph(store, r, state.home_graph)
                if guard is not None and not guard(state, g, "write"):
                    raise PermissionDenied(f"write to {g}")
                inserts.extend(Quad(r, p, v, g) for v in sorted(add, key=str))
            for q in drop:
                if guard is not None and not guard(state, q.g, "delete"):
                    raise PermissionDenied(f"delete from {q.g}")
            deletes.extend(drop)
        try:
            store.apply(inserts=inserts, deletes=deletes)
        except QuotaExceeded as e:
            raise QuotaFault(f"graph {e.graph} limit {e.limit}") from None
        except ValueError as e:
            raise TypeFault(str(e)) from None


def _invoke(w: _Work, ins: Instruction, store: GraphStore):
    if ins.invoke is None:
        raise TypeFault("Invoke without a method")
    receivers = sorted(_resources(w.pop(), "receivers"), key=str)
    if not receivers:
        # No receiver, no call: still consume the arguments.
        arity = len(method_params(store, ins.invoke)) if store.value(ins.invoke, RVM_NS.param) is not None else None
        if arity is None:
            raise TypeFault(f"cannot determine arity of {ins.invoke}")
        for _ in range(arity):
            w.pop()
        return
    first, rest = receivers[0], receivers[1:]
    method = resolve_method(store, first, ins.invoke)
    n = len(method_params(store, method))
    args = [w.pop() for _ in range(n)][::-1]
    if rest:
        if store.value(method, RVM_NS.returnType) is not None:
            raise TypeFault("value-returning method invoked on several receivers")
        for a in args:
            w.operands.insert(0, a)
        w.push(rest)
        site = ins.uri
    else:
        if ins.next is None:
            raise TypeFault("Invoke has no return site")
        site = ins.next
    start = store.value(method, RVM_NS.firstInst)
    if not isinstance(start, Uri):
        raise TypeFault(f"{method} has no first instruction")
    w.frames.insert(0, _frame_for(store, method, first, args))
    w.returns.insert(0, site)
    w.location = start


def _return(w: _Work, ins: Instruction):
    value = w.pop() if ins.returns_value else None
    w.location = None
    if w.returns:
        if w.returns[0] != HALT:
            w.location = w.returns.pop(0)
            w.frames.pop(0)
    if value is not None:
        w.operands.insert(0, value)


def push_self(state: RvmState) -> RvmState:
    """Push the machine's own URI, as a PushValue of ``state.uri`` would."""
    return replace(state, operand_stack=((state.uri,),) + state.operand_stack)


def self_reference(state: RvmState, graph: Uri, next_inst: Optional[Uri] = None, minter=uuid_minter):
    """Quads for a PushValue instruction whose value is the machine itself."""
    u = minter()
    quads = [Quad(u, RDF_TYPE, RVM_NS.PushValue, graph), Quad(u, RVM_NS.value, state.uri, graph)]
    if next_inst is not None:
        quads.append(Quad(u, RVM_NS.nextInst, next_inst, graph))
    return u, quads


# -- run -----------------------------------------------------------------------


def with_fault(state: RvmState, fault: Fault) -> RvmState:
    return replace(state, fault=str(fault), program_location=None, needs_process=False)


def run(
    state: RvmState,
    store: GraphStore,
    mode: str = "r-fhat",
    guard: Optional[Guard] = None,
) -> RvmState:
    """Step until terminal, faulted or out of cycles; the final state is stored.

    A machine that runs out of cycles is stored with ``needsProcess`` true so
    that any worker can resume it later.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    state = replace(state, needs_process=False)
    if mode == "fhat":
        store_state(store, state)
    while state.program_location is not None and state.cycles_remaining > 0:
        try:
            if mode == "fhat":
                try:
                    state = load_state(store, state.uri)
                except MalformedState as e:
                    raise StateFault(str(e)) from None
            state = step(state, store, guard)
        except Fault as f:
            log.info("machine %s faulted: %s", state.uri, f)
            state = with_fault(state, f)
        if mode == "fhat":
            store_state(store, state)
    if state.program_location is not None:
        state = replace(state, needs_process=True)
    store_state(store, state)
    return state


def create_machine(
    store: GraphStore,
    receiver: Uri,
    method,
    args: Sequence = (),
    home_graph: Optional[Uri] = None,
    uri: Optional[Uri] = None,
    cycles: int = DEFAULT_CYCLES,
    minter=uuid_minter,
    needs_process: bool = True,
) -> RvmState:
    """Create and store a machine that will run ``receiver.method(*args)``.

    ``method`` is a method name or method URI; each arg is a Term or a
    sequence of Terms (a ValueSet).  The machine lives in ``home_graph``,
    by default the receiver's own graph.
    """
    if isinstance(method, Uri) and method in store.objects(receiver, RVM_NS.hasMethod):
        m = method
    else:
        m = method_by_name(store, receiver, str(method))
    if m is None:
        raise LookupError(f"{receiver} has no method {method}")
    arg_sets = [value_set(a) if isinstance(a, (list, tuple, set, frozenset)) else (a,) for a in args]
    try:
        frame = _frame_for(store, m, receiver, arg_sets)
    except TypeFault as e:
        raise ValueError(e.message) from None
    start = store.value(m, RVM_NS.firstInst)
    if start is None:
        raise LookupError(f"{m} has no first instruction")
    state = RvmState(
        uri=uri if uri is not None else minter(),
        home_graph=home_graph if home_graph is not None else receiver_graph(store, receiver, DEFAULT_GRAPH),
        program_location=start,
        return_stack=(HALT,),
        frame_stack=(frame,),
        cycles_remaining=cycles,
        needs_process=needs_process,
    )
    store_state(store, state)
    return state


def program_state(
    store: GraphStore,
    first_inst: Uri,
    home_graph: Uri,
    bindings: Optional[dict] = None,
    uri: Optional[Uri] = None,
    cycles: int = DEFAULT_CYCLES,
    minter=uuid_minter,
) -> RvmState:
    """A machine positioned at a bare instruction chain, outside any method."""
    frame = Frame(home_graph)
    for name, values in (bindings or {}).items():
        frame = frame.declare(name, values, home_graph)
    return RvmState(
        uri=uri if uri is not None else minter(),
        home_graph=home_graph,
        program_location=first_inst,
        return_stack=(HALT,),
        frame_stack=(frame,),
        cycles_remaining=cycles,
    )


__all__ = [
    "DEFAULT_CYCLES",
    "MODES",
    "CardinalityFault",
    "Fault",
    "Instruction",
    "OutOfCycles",
    "PermissionDenied",
    "QuotaFault",
    "StackUnderflow",
    "StateFault",
    "TypeFault",
    "cardinality",
    "create_machine",
    "discard_state",
    "method_by_name",
    "program_state",
    "push_self",
    "read_instruction",
    "receiver_graph",
    "resolve_method",
    "run",
    "self_reference",
    "step",
    "with_fault",
]
