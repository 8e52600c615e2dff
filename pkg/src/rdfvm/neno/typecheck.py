"""Static checks over a parsed unit.

The checker works on a deep copy of the tree, fills in ``ty`` on every
expression and ``target`` on every call, and returns a :class:`CheckedUnit`
that also answers inheritance-aware field and method lookups for the compiler.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional

from ..terms import RDFS, XSD, Literal, Uri
from . import ast
from .errors import ArityError, TypeCheckError, TypeMismatch, UnknownField

RESOURCE = Uri(RDFS + "Resource")
BOOLEAN = Uri(XSD + "boolean")
INT = Uri(XSD + "int")
DOUBLE = Uri(XSD + "double")
STRING = Uri(XSD + "string")

_INTS = {Uri(XSD + t) for t in ("int", "integer", "long", "short", "byte", "nonNegativeInteger", "positiveInteger")}
_FLOATS = {Uri(XSD + t) for t in ("double", "float", "decimal")}


class UnknownVariable(TypeCheckError):
    def __init__(self, name: str, loc=(0, 0)):
        super().__init__(f"unknown variable {name!r}", *loc)
        self.name = name


class UnknownMethod(TypeCheckError):
    def __init__(self, method: str, cls, loc=(0, 0)):
        super().__init__(f"{cls} has no method {method!r}", *loc)
        self.method = method
        self.cls = cls


def is_numeric_type(t) -> bool:
    return t in _INTS or t in _FLOATS


def is_datatype(t) -> bool:
    return isinstance(t, Uri) and t.iri.startswith(XSD)


@dataclass
class CheckedUnit:
    unit: ast.NenoUnit

    def __post_init__(self):
        self.classes = {c.uri: c for c in self.unit.classes}

    @property
    def prefixes(self) -> dict:
        return self.unit.prefixes

    def lineage(self, cls: Uri) -> list:
        """``cls`` followed by its superclasses declared in this unit."""
        out = []
        while cls in self.classes and cls not in out:
            out.append(cls)
            cls = self.classes[cls].super_class
        return out

    def is_subclass(self, sub: Uri, sup: Uri) -> bool:
        if sub == sup:
            return True
        chain = self.lineage(sub)
        if sup in chain:
            return True
        return bool(chain) and self.classes[chain[-1]].super_class == sup

    def field(self, cls: Uri, predicate: Uri) -> Optional[ast.FieldDecl]:
        for c in self.lineage(cls):
            f = self.classes[c].field(predicate)
            if f is not None:
                return f
        return None

    def fields(self, cls: Uri) -> list:
        seen, out = set(), []
        for c in self.lineage(cls):
            for f in self.classes[c].fields:
                if f.predicate not in seen:
                    seen.add(f.predicate)
                    out.append(f)
        return out

    def method(self, cls: Uri, name: str) -> Optional[tuple]:
        """(declaring class, MethodDecl) for ``name`` as seen from ``cls``."""
        for c in self.lineage(cls):
            m = self.classes[c].method(name)
            if m is not None:
                return c, m
        return None

    def methods(self, cls: Uri) -> list:
        """(declaring class, MethodDecl) pairs visible on ``cls``, overrides first."""
        seen, out = set(), []
        for c in self.lineage(cls):
            for m in self.classes[c].methods:
                if m.name not in seen:
                    seen.add(m.name)
                    out.append((c, m))
        return out

    def declaring_classes(self, predicate: Uri) -> list:
        return [c.uri for c in self.unit.classes if c.field(predicate) is not None]


class _Scope:
    def __init__(self, parent: Optional["_Scope"] = None):
        self.parent = parent
        self.names: dict = {}

    def lookup(self, name):
        s = self
        while s is not None:
            if name in s.names:
                return s.names[name]
            s = s.parent
        return None


class Checker:
    def __init__(self, checked: CheckedUnit):
        self.cu = checked
        self.cls: Optional[Uri] = None
        self.method: Optional[ast.MethodDecl] = None

    # -- compatibility --------------------------------------------------------

    def compatible(self, expected: Uri, found) -> bool:
        if found is None:
            return False
        if expected == found:
            return True
        if is_datatype(expected) or is_datatype(found):
            if expected in _FLOATS and found in _INTS:
                return True
            return expected in _INTS and found in _INTS
        if expected == RESOURCE or found == RESOURCE:
            return True
        if expected in self.cu.classes and found in self.cu.classes:
            return self.cu.is_subclass(found, expected)
        return True

    def require(self, expected: Uri, found, pos):
        if not self.compatible(expected, found):
            raise TypeMismatch(expected, found if found is not None else "void", pos)

    # -- expressions ----------------------------------------------------------

    def expr(self, e, scope: _Scope):
        t = self._expr(e, scope)
        e.ty = t
        return t

    def value(self, e, scope: _Scope):
        t = self.expr(e, scope)
        if t is None:
            raise TypeMismatch("a value", "void", e.pos)
        return t

    def _expr(self, e, scope):
        if isinstance(e, ast.This):
            return self.cls
        if isinstance(e, ast.Var):
            t = scope.lookup(e.name)
            if t is None:
                raise UnknownVariable(e.name, e.pos)
            return t
        if isinstance(e, ast.Const):
            return Uri(e.term.datatype) if isinstance(e.term, Literal) else RESOURCE
        if isinstance(e, ast.PathExpr):
            t = self.value(e.base, scope)
            for step in e.steps:
                t = self.step(t, step)
            return t
        if isinstance(e, ast.Arith):
            a = self.value(e.lhs, scope)
            b = self.value(e.rhs, scope)
            for side, t in ((e.lhs, a), (e.rhs, b)):
                if not is_numeric_type(t):
                    raise TypeMismatch("a numeric type", t, side.pos)
            return DOUBLE if (a in _FLOATS or b in _FLOATS) else INT
        if isinstance(e, ast.SetQuery):
            t = self.value(e.target, scope)
            self.require(t, self.value(e.value, scope), e.value.pos)
            return BOOLEAN
        if isinstance(e, ast.Call):
            return self.call(e, scope)
        raise TypeCheckError(f"unsupported expression {type(e).__name__}", *getattr(e, "pos", (0, 0)))

    def step(self, t: Uri, step: ast.Step) -> Uri:
        p = step.predicate
        if step.inverse:
            owners = self.cu.declaring_classes(p)
            if not owners:
                raise UnknownField(p, t, step.pos)
            return owners[0]
        if t in self.cu.classes:
            f = self.cu.field(t, p)
            if f is None:
                raise UnknownField(p, t, step.pos)
            return f.range
        if is_datatype(t):
            raise UnknownField(p, t, step.pos)
        for c in self.cu.unit.classes:
            f = c.field(p)
            if f is not None:
                return f.range
        raise UnknownField(p, t, step.pos)

    def call(self, call: ast.Call, scope) -> Optional[Uri]:
        if call.receiver is None:
            rt = self.cls
        else:
            rt = self.value(call.receiver, scope)
        found = None
        if rt in self.cu.classes:
            found = self.cu.method(rt, call.method)
        elif not is_datatype(rt):
            for c in self.cu.unit.classes:
                m = c.method(call.method)
                if m is not None:
                    found = (c.uri, m)
                    break
        if found is None:
            raise UnknownMethod(call.method, rt, call.pos)
        owner, m = found
        if len(call.args) != len(m.params):
            raise ArityError(call.method, len(m.params), len(call.args), call.pos)
        for arg, param in zip(call.args, m.params):
            self.require(param.type, self.value(arg, scope), arg.pos)
        call.target = (owner, m.name)
        return m.return_type

    # -- statements -----------------------------------------------------------

    def block(self, stmts, scope: _Scope) -> bool:
        """Check a statement list; True when every path through it returns."""
        returns = False
        for s in stmts:
            if returns:
                raise TypeCheckError("unreachable statement", *s.pos)
            returns = self.stmt(s, scope)
        return returns

    def stmt(self, s, scope: _Scope) -> bool:
        if isinstance(s, ast.VarDecl):
            if s.name in scope.names:
                raise TypeCheckError(f"variable {s.name!r} already declared in this block", *s.pos)
            if s.init is not None:
                self.require(s.type, self.value(s.init, scope), s.init.pos)
            scope.names[s.name] = s.type
            return False
        if isinstance(s, ast.SetStmt):
            self.set_stmt(s, scope)
            return False
        if isinstance(s, ast.If):
            self.require(BOOLEAN, self.value(s.cond, scope), s.cond.pos)
            a = self.block(s.then, _Scope(scope))
            b = self.block(s.orelse, _Scope(scope)) if s.orelse is not None else False
            return a and b
        if isinstance(s, ast.While):
            self.require(BOOLEAN, self.value(s.cond, scope), s.cond.pos)
            self.block(s.body, _Scope(scope))
            return False
        if isinstance(s, ast.Return):
            if self.method.return_type is None:
                raise TypeCheckError(f"void method {self.method.name!r} cannot return a value", *s.pos)
            self.require(self.method.return_type, self.value(s.expr, scope), s.expr.pos)
            return True
        if isinstance(s, ast.CallStmt):
            self.call(s.call, scope)
            return False
        if isinstance(s, ast.ExprStmt):
            self.expr(s.expr, scope)
            return False
        raise TypeCheckError(f"unsupported statement {type(s).__name__}", *s.pos)

    def set_stmt(self, s: ast.SetStmt, scope):
        t = self.value(s.target, scope)
        if s.op == "=/":
            if isinstance(s.target, ast.PathExpr):
                f = self._final_field(s.target)
                if f is not None and f.min >= 1:
                    raise TypeCheckError(f"cannot clear {f.predicate}: cardinality requires at least {f.min}", *s.pos)
            return
        self.require(t, self.value(s.value, scope), s.value.pos)

    def _final_field(self, path: ast.PathExpr):
        owner = path.base.ty
        for step in path.steps[:-1]:
            owner = self.step(owner, step)
        pred = path.steps[-1].predicate
        if owner in self.cu.classes:
            return self.cu.field(owner, pred)
        for c in self.cu.unit.classes:
            f = c.field(pred)
            if f is not None:
                return f
        return None

    # -- declarations ---------------------------------------------------------

    def unit(self):
        seen = set()
        for c in self.cu.unit.classes:
            if c.uri in seen:
                raise TypeCheckError(f"class {c.uri} declared twice", *c.pos)
            seen.add(c.uri)
        for c in self.cu.unit.classes:
            chain, cur = [], c.uri
            while cur in self.cu.classes:
                if cur in chain:
                    raise TypeCheckError(f"cyclic inheritance through {cur}", *c.pos)
                chain.append(cur)
                cur = self.cu.classes[cur].super_class
            self.class_decl(c)

    def class_decl(self, c: ast.ClassDecl):
        preds = set()
        for f in c.fields:
            if f.predicate in preds:
                raise TypeCheckError(f"field {f.predicate} declared twice", *f.pos)
            preds.add(f.predicate)
        names = set()
        for m in c.methods:
            if m.name in names:
                raise TypeCheckError(f"method {m.name!r} declared twice", *m.pos)
            names.add(m.name)
        self.cls = c.uri
        for m in c.methods:
            self.method = m
            scope = _Scope()
            for p in m.params:
                if p.name in scope.names:
                    raise TypeCheckError(f"parameter {p.name!r} declared twice", *p.pos)
                scope.names[p.name] = p.type
            returns = self.block(m.body, _Scope(scope))
            if m.return_type is not None and not returns:
                raise TypeCheckError(f"method {m.name!r} does not return on every path", *m.pos)


def typecheck(unit: ast.NenoUnit) -> CheckedUnit:
    """Check ``unit`` and return an annotated copy; the input is left untouched."""
    checked = CheckedUnit(copy.deepcopy(unit))
    Checker(checked).unit()
    return checked
