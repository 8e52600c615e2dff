"""Lower checked Neno units to RDF instruction graphs.

``compile_api`` produces the class/field/method templates, ``instantiate``
clones them into an object's own named graph, and ``lower_path`` exposes
the traversal chain for a path expression together with the equivalent
SELECT query.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

from .neno import ast
from .neno.typecheck import CheckedUnit
from .sparql import QuadPattern, SelectQuery
from .store import GraphStore, Quad
from .terms import (
    OWL,
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    RDFS,
    RVM_NS,
    Literal,
    Uri,
    Variable,
    bool_literal,
    int_literal,
    string_literal,
)

API_GRAPH = RVM_NS.api
HALT = RVM_NS.halt

INSTRUCTION_KINDS = (
    "PushValue",
    "Load",
    "Add",
    "Subtract",
    "Multiply",
    "Divide",
    "Set",
    "SetPlus",
    "SetMinus",
    "SetClear",
    "SetQuery",
    "TraverseForward",
    "TraverseInverse",
    "Invoke",
    "Return",
    "Branch",
    "NoOp",
)

_ARITH = {"+": "Add", "-": "Subtract", "*": "Multiply", "/": "Divide"}
_SETTERS = {"=": "Set", "=+": "SetPlus", "=-": "SetMinus", "=/": "SetClear"}

Minter = Callable[[], Uri]


def uuid_minter() -> Uri:
    return Uri(f"urn:uuid:{uuid.uuid4()}")


class UnknownClass(LookupError):
    def __init__(self, cls):
        super().__init__(f"class {cls} is not declared in the API graph")
        self.cls = cls


# -- intermediate form ----------------------------------------------------------


class Block:
    """Scope marker; the method root block materializes as the method URI."""

    def __init__(self, root: bool = False):
        self.root = root


@dataclass(eq=False)
class Instr:
    kind: str
    value: object = None
    symbol: Optional[str] = None
    predicate: Optional[Uri] = None
    invoke: Optional[Uri] = None
    block: Optional[Block] = None
    returns_value: bool = False
    next: Optional["Instr"] = None
    on_true: Optional["Instr"] = None
    on_false: Optional["Instr"] = None

    def successors(self) -> list:
        return [i for i in (self.next, self.on_true, self.on_false) if i is not None]

    def describe(self) -> str:
        arg = self.value if self.value is not None else self.symbol if self.symbol is not None else self.predicate
        if self.invoke is not None:
            arg = self.invoke
        return self.kind if arg is None else f"{self.kind} {arg}"


class _Emitter:
    def __init__(self, templates: dict):
        self.templates = templates
        self.instrs: list[Instr] = []
        self.pending: list[tuple[Instr, str]] = []

    def emit(self, ins: Instr) -> Instr:
        for src, attr in self.pending:
            setattr(src, attr, ins)
        if ins.kind == "Branch":
            self.pending = []
        elif ins.kind == "Return":
            self.pending = []
        else:
            self.pending = [(ins, "next")]
        self.instrs.append(ins)
        return ins

    # expressions leave exactly one ValueSet on the operand stack (or none for void calls)

    def expr(self, e) -> None:
        if isinstance(e, ast.This):
            self.emit(Instr("Load", symbol="this"))
        elif isinstance(e, ast.Var):
            self.emit(Instr("Load", symbol=e.name))
        elif isinstance(e, ast.Const):
            self.emit(Instr("PushValue", value=e.term))
        elif isinstance(e, ast.PathExpr):
            self.expr(e.base)
            for step in e.steps:
                self.traverse(step)
        elif isinstance(e, ast.Arith):
            self.expr(e.lhs)
            self.expr(e.rhs)
            self.emit(Instr(_ARITH[e.op]))
        elif isinstance(e, ast.SetQuery):
            self.expr(e.value)
            self.setter("SetQuery", e.target)
        elif isinstance(e, ast.Call):
            self.call(e)
        else:
            raise TypeError(f"cannot lower {type(e).__name__}")

    def traverse(self, step: ast.Step):
        kind = "TraverseInverse" if step.inverse else "TraverseForward"
        self.emit(Instr(kind, predicate=step.predicate))

    def receiver(self, path) -> None:
        """Push the receiver set of a field path (everything but the last step)."""
        self.expr(path.base)
        for step in path.steps[:-1]:
            self.traverse(step)

    def setter(self, kind: str, target, block: Optional[Block] = None):
        if isinstance(target, ast.Var):
            self.emit(Instr(kind, symbol=target.name, block=block))
        else:
            self.receiver(target)
            self.emit(Instr(kind, predicate=target.steps[-1].predicate))

    def call(self, c: ast.Call):
        for arg in c.args:
            self.expr(arg)
        if c.receiver is None:
            self.emit(Instr("Load", symbol="this"))
        else:
            self.expr(c.receiver)
        self.emit(Instr("Invoke", invoke=self.templates[c.target]))

    def discard(self):
        self.emit(Instr("Set", symbol="_"))

    # statements

    def block(self, stmts, blk: Block):
        declares = False
        for s in stmts:
            declares |= self.stmt(s, blk)
        if declares and not blk.root and self.pending:
            self.emit(Instr("NoOp", block=blk))

    def stmt(self, s, blk: Block) -> bool:
        """Lower one statement; True if it declared a variable in ``blk``."""
        if isinstance(s, ast.VarDecl):
            if s.init is None:
                self.emit(Instr("SetClear", symbol=s.name, block=blk))
            else:
                self.expr(s.init)
                self.emit(Instr("Set", symbol=s.name, block=blk))
            return True
        if isinstance(s, ast.SetStmt):
            if s.op != "=/":
                self.expr(s.value)
            self.setter(_SETTERS[s.op], s.target)
        elif isinstance(s, ast.Return):
            self.expr(s.expr)
            self.emit(Instr("Return", returns_value=True))
        elif isinstance(s, ast.CallStmt):
            self.call(s.call)
            if s.call.ty is not None:
                self.discard()
        elif isinstance(s, ast.ExprStmt):
            self.expr(s.expr)
            if s.expr.ty is not None:
                self.discard()
        elif isinstance(s, ast.If):
            self.expr(s.cond)
            br = self.emit(Instr("Branch"))
            self.pending = [(br, "on_true")]
            self.block(s.then, Block())
            after_then = self.pending
            self.pending = [(br, "on_false")]
            if s.orelse is not None:
                self.block(s.orelse, Block())
            self.pending = after_then + self.pending
            if self.pending:
                self.emit(Instr("NoOp"))
        elif isinstance(s, ast.While):
            start = len(self.instrs)
            self.expr(s.cond)
            head = self.instrs[start]
            br = self.emit(Instr("Branch"))
            self.pending = [(br, "on_true")]
            self.block(s.body, Block())
            for src, attr in self.pending:
                setattr(src, attr, head)
            self.pending = [(br, "on_false")]
            self.emit(Instr("NoOp"))
        else:
            raise TypeError(f"cannot lower {type(s).__name__}")
        return False


def lower_method(method: ast.MethodDecl, templates: dict) -> list[Instr]:
    """Instruction list for a checked method body; element 0 is the entry point."""
    em = _Emitter(templates)
    em.block(method.body, Block(root=True))
    if em.pending or not em.instrs:
        em.emit(Instr("Return"))
    return em.instrs


def reachable(first: Instr) -> list[Instr]:
    out, seen, todo = [], set(), [first]
    while todo:
        ins = todo.pop()
        if id(ins) in seen:
            continue
        seen.add(id(ins))
        out.append(ins)
        todo.extend(reversed(ins.successors()))
    return out


def materialize(
    instrs: Iterable[Instr],
    graph: Uri,
    minter: Minter = uuid_minter,
    root: Optional[Uri] = None,
) -> tuple[dict, list[Quad]]:
    """Encode instructions as quads in ``graph``.

    Returns ``(uris, quads)`` where ``uris`` maps each Instr (by identity) to
    its minted URI.  The root block is written as ``root``.
    """
    instrs = list(instrs)
    uris = {id(i): minter() for i in instrs}
    blocks: dict = {}
    quads = []

    def add(s, p, o):
        quads.append(Quad(s, p, o, graph))

    for ins in instrs:
        u = uris[id(ins)]
        add(u, RDF_TYPE, RVM_NS[ins.kind])
        if ins.value is not None:
            add(u, RVM_NS.value, ins.value)
        if ins.symbol is not None:
            add(u, RVM_NS.symbol, string_literal(ins.symbol))
        if ins.predicate is not None:
            add(u, RVM_NS.predicate, ins.predicate)
        if ins.invoke is not None:
            add(u, RVM_NS.invokeMethod, ins.invoke)
        if ins.block is not None:
            if ins.block.root and root is not None:
                b = root
            else:
                b = blocks.get(id(ins.block))
                if b is None:
                    b = blocks[id(ins.block)] = minter()
            add(u, RVM_NS.fromBlock, b)
        if ins.returns_value:
            add(u, RVM_NS.returnsValue, bool_literal(True))
        if ins.next is not None:
            add(u, RVM_NS.nextInst, uris[id(ins.next)])
        if ins.on_true is not None:
            add(u, RVM_NS.branchTrue, uris[id(ins.on_true)])
        if ins.on_false is not None:
            add(u, RVM_NS.branchFalse, uris[id(ins.on_false)])
    return uris, quads


def _rdf_list(items: list, graph: Uri, new_node: Callable[[], object]) -> tuple[object, list[Quad]]:
    head: object = RDF_NIL
    quads = []
    for item in reversed(items):
        cell = new_node()
        quads.append(Quad(cell, RDF_FIRST, item, graph))
        quads.append(Quad(cell, RDF_REST, head, graph))
        head = cell
    return head, quads


def read_list(store: GraphStore, head, graph: Optional[Uri] = None, limit: int = 100000) -> list:
    """Items of an rdf:List; raises ValueError on a broken chain."""
    out, seen = [], set()
    while head != RDF_NIL:
        if head in seen or len(out) > limit:
            raise ValueError(f"cyclic rdf:List at {head}")
        seen.add(head)
        firsts = store.objects(head, RDF_FIRST, graph)
        rests = store.objects(head, RDF_REST, graph)
        if len(firsts) != 1 or len(rests) != 1:
            raise ValueError(f"broken rdf:List cell {head}")
        out.append(firsts[0])
        head = rests[0]
    return out


# -- API graph -----------------------------------------------------------------


def compile_api(checked: CheckedUnit, graph: Uri = API_GRAPH, minter: Minter = uuid_minter) -> GraphStore:
    """Encode classes, fields and method templates of ``checked`` as quads in ``graph``."""
    api = GraphStore()
    quads: list[Quad] = []

    def add(s, p, o):
        quads.append(Quad(s, p, o, graph))

    templates = {}
    for c in checked.unit.classes:
        for m in c.methods:
            templates[(c.uri, m.name)] = minter()

    for c in checked.unit.classes:
        add(c.uri, RDF_TYPE, Uri(OWL + "Class"))
        add(c.uri, Uri(RDFS + "subClassOf"), c.super_class)
        for f in c.fields:
            fu = minter()
            add(c.uri, RVM_NS.field, fu)
            add(fu, RDF_TYPE, RVM_NS.Field)
            add(fu, RVM_NS.predicate, f.predicate)
            add(fu, RVM_NS.range, f.range)
            add(fu, RVM_NS.minCard, int_literal(f.min))
            if f.max is not None:
                add(fu, RVM_NS.maxCard, int_literal(f.max))
        for m in c.methods:
            t = templates[(c.uri, m.name)]
            add(c.uri, RVM_NS.hasMethod, t)
            add(t, RDF_TYPE, RVM_NS.Method)
            add(t, RVM_NS.methodName, string_literal(m.name))
            if m.return_type is not None:
                add(t, RVM_NS.returnType, m.return_type)
            params = []
            for p in m.params:
                node = api.fresh_blank()
                api.insert(Quad(node, RVM_NS.symbol, string_literal(p.name), graph))
                api.insert(Quad(node, RVM_NS.range, p.type, graph))
                params.append(node)
            head, cells = _rdf_list(params, graph, api.fresh_blank)
            api.add_all(cells)
            add(t, RVM_NS.param, head)
            instrs = lower_method(m, templates)
            uris, iq = materialize(instrs, graph, minter, root=t)
            add(t, RVM_NS.firstInst, uris[id(instrs[0])])
            quads.extend(iq)
    api.add_all(quads)
    return api


# -- instantiation -------------------------------------------------------------


@dataclass
class ObjectInstance:
    uri: Uri
    class_uri: Uri
    graph: Uri
    methods: dict = field(default_factory=dict)


def _api_view(store: GraphStore, api: Union[GraphStore, Uri]) -> GraphStore:
    if isinstance(api, GraphStore):
        return api
    return GraphStore(store.match(g=api))


def class_lineage(api: GraphStore, cls: Uri) -> list:
    out = []
    while cls is not None and cls not in out and api.match(cls, RDF_TYPE, Uri(OWL + "Class")):
        out.append(cls)
        cls = api.value(cls, Uri(RDFS + "subClassOf"))
    return out


def visible_methods(api: GraphStore, cls: Uri) -> list:
    """(name, template) pairs for ``cls``; subclass definitions win."""
    seen, out = set(), []
    for c in class_lineage(api, cls):
        for t in sorted(api.objects(c, RVM_NS.hasMethod), key=str):
            name = api.value(t, RVM_NS.methodName)
            if name is not None and name.lexical not in seen:
                seen.add(name.lexical)
                out.append((name.lexical, t))
    return out


def _instruction_closure(api: GraphStore, first: Uri) -> list:
    out, seen, todo = [], set(), [first]
    while todo:
        u = todo.pop()
        if u in seen:
            continue
        seen.add(u)
        out.append(u)
        for p in (RVM_NS.nextInst, RVM_NS.branchTrue, RVM_NS.branchFalse):
            todo.extend(api.objects(u, p))
    return out


def _clone_params(api: GraphStore, store: GraphStore, owner, head, g: Uri) -> list[Quad]:
    quads, params = [], []
    for p in read_list(api, head):
        node = store.fresh_blank()
        for q in api.match(p, None, None, None):
            quads.append(Quad(node, q.p, q.o, g))
        params.append(node)
    new_head, cells = _rdf_list(params, g, store.fresh_blank)
    quads.extend(cells)
    quads.append(Quad(owner, RVM_NS.param, new_head, g))
    return quads


def instantiate(
    store: GraphStore,
    api: Union[GraphStore, Uri],
    class_uri: Uri,
    object_uri: Optional[Uri] = None,
    minter: Minter = uuid_minter,
    spawned_by: Optional[Uri] = None,
) -> ObjectInstance:
    """Create an object of ``class_uri`` in its own named graph.

    The graph is named by the object URI.  Every visible method is cloned
    with freshly minted instruction, block and method URIs.
    """
    api = _api_view(store, api)
    if not class_lineage(api, class_uri):
        raise UnknownClass(class_uri)
    obj = object_uri if object_uri is not None else minter()
    g = obj
    with store.lock:
        if store.match(obj, RDF_TYPE, None, g):
            raise ValueError(f"{obj} is already instantiated")
        quads = [Quad(obj, RDF_TYPE, class_uri, g)]
        if spawned_by is not None:
            quads.append(Quad(g, RVM_NS.spawnedBy, spawned_by, g))
        methods = {}
        named_templates = set()
        for name, t in visible_methods(api, class_uri):
            m = minter()
            methods[name] = m
            quads.append(Quad(obj, RVM_NS.hasMethod, m, g))
            quads.append(Quad(m, RDF_TYPE, RVM_NS.Method, g))
            quads.append(Quad(m, RVM_NS.template, t, g))
            quads.append(Quad(m, RVM_NS.methodName, string_literal(name), g))
            rt = api.value(t, RVM_NS.returnType)
            if rt is not None:
                quads.append(Quad(m, RVM_NS.returnType, rt, g))
            head = api.value(t, RVM_NS.param)
            if head is not None:
                quads.extend(_clone_params(api, store, m, head, g))

            first = api.value(t, RVM_NS.firstInst)
            closure = _instruction_closure(api, first)
            remap = {u: minter() for u in closure}
            blocks = {t: m}
            for u in closure:
                for q in api.match(u, None, None, None):
                    o = q.o
                    if q.p == RVM_NS.fromBlock:
                        if o not in blocks:
                            blocks[o] = minter()
                        o = blocks[o]
                    elif q.p in (RVM_NS.nextInst, RVM_NS.branchTrue, RVM_NS.branchFalse):
                        o = remap[o]
                    elif q.p == RVM_NS.invokeMethod:
                        named_templates.add(o)
                    quads.append(Quad(remap[u], q.p, o, g))
            quads.append(Quad(m, RVM_NS.firstInst, remap[first], g))
        # Invokes name their target by template; keep those names local so the
        # object still resolves overridden methods when the API graph is absent.
        for t in sorted(named_templates, key=str):
            name = api.value(t, RVM_NS.methodName)
            if name is not None:
                quads.append(Quad(t, RVM_NS.methodName, name, g))
            head = api.value(t, RVM_NS.param)
            if head is not None:
                quads.extend(_clone_params(api, store, t, head, g))
        store.add_all(quads)
    return ObjectInstance(obj, class_uri, g, methods)


# -- path lowering -------------------------------------------------------------


@dataclass
class LoweredPath:
    instructions: list
    query: Optional[SelectQuery]
    base: object  # a Term, or the symbol name for variable bases
    result_var: str = "y"

    @property
    def chain(self) -> list:
        return [i.describe() for i in self.instructions]


def lower_path(path) -> LoweredPath:
    """Traversal chain and equivalent SELECT for a path expression.

    ``this`` and variable bases become query variables of the same name; the
    caller supplies their bindings as initial solutions.
    """
    if not isinstance(path, ast.PathExpr):
        path = ast.PathExpr(path, [])
    em = _Emitter({})
    em.expr(path)
    base = path.base
    if isinstance(base, ast.Const):
        start = base.term
    elif isinstance(base, ast.This):
        start = Variable("this")
    else:
        start = Variable(base.name)
    if not path.steps:
        return LoweredPath(em.instrs, None, start)
    n = len(path.steps)
    names = ["x" if i == 0 else f"x{i + 1}" for i in range(n - 1)] + ["y"]
    patterns = []
    cur = start
    for step, name in zip(path.steps, names):
        nxt = Variable(name)
        if step.inverse:
            patterns.append(QuadPattern(nxt, step.predicate, cur))
        else:
            patterns.append(QuadPattern(cur, step.predicate, nxt))
        cur = nxt
    return LoweredPath(em.instrs, SelectQuery(["y"], patterns), start)


def template_chain(api: GraphStore, template: Uri) -> list[str]:
    """Readable ``Kind arg`` listing of a method's straight-line instruction chain."""
    out = []
    u = api.value(template, RVM_NS.firstInst)
    seen = set()
    while u is not None and u not in seen:
        seen.add(u)
        kind = api.value(u, RDF_TYPE)
        label = kind.iri[len(RVM_NS.base):] if isinstance(kind, Uri) else str(kind)
        for p in (RVM_NS.value, RVM_NS.symbol, RVM_NS.predicate, RVM_NS.invokeMethod):
            v = api.value(u, p)
            if v is not None:
                label += f" {v.lexical if isinstance(v, Literal) and p == RVM_NS.symbol else v}"
        out.append(label)
        u = api.value(u, RVM_NS.nextInst)
    return out


__all__ = [
    "API_GRAPH",
    "HALT",
    "INSTRUCTION_KINDS",
    "Block",
    "Instr",
    "LoweredPath",
    "ObjectInstance",
    "UnknownClass",
    "class_lineage",
    "compile_api",
    "instantiate",
    "lower_method",
    "lower_path",
    "materialize",
    "read_list",
    "reachable",
    "template_chain",
    "uuid_minter",
    "visible_methods",
]
