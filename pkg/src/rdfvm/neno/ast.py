"""Syntax tree for Neno source.

Positions and type annotations are excluded from equality so that trees
produced from differently formatted (or pretty-printed) source compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..terms import Literal, Uri

Pos = tuple


def _pos():
    return field(default=(0, 0), compare=False, repr=False)


def _ty():
    return field(default=None, compare=False, repr=False)


# -- expressions -----------------------------------------------------------------


@dataclass
class This:
    pos: Pos = _pos()
    ty: Optional[Uri] = _ty()


@dataclass
class Var:
    name: str
    pos: Pos = _pos()
    ty: Optional[Uri] = _ty()


@dataclass
class Const:
    term: Union[Uri, Literal]
    pos: Pos = _pos()
    ty: Optional[Uri] = _ty()


@dataclass
class Step:
    predicate: Uri
    inverse: bool = False
    pos: Pos = _pos()


@dataclass
class PathExpr:
    base: Union[This, Var, Const]
    steps: list[Step]
    pos: Pos = _pos()
    ty: Optional[Uri] = _ty()


@dataclass
class Arith:
    op: str  # one of + - * /
    lhs: "Expr"
    rhs: "Expr"
    pos: Pos = _pos()
    ty: Optional[Uri] = _ty()


@dataclass
class SetQuery:
    target: Union[Var, PathExpr]
    value: "Expr"
    pos: Pos = _pos()
    ty: Optional[Uri] = _ty()


@dataclass
class Call:
    receiver: Optional["Expr"]  # None: implicit ``this``
    method: str
    args: list["Expr"]
    pos: Pos = _pos()
    ty: Optional[Uri] = _ty()
    # Filled by the type checker: (declaring class, method name).
    target: Optional[tuple] = field(default=None, compare=False, repr=False)

    @property
    def inverse(self) -> bool:
        r = self.receiver
        return isinstance(r, PathExpr) and bool(r.steps) and r.steps[-1].inverse


Expr = Union[This, Var, Const, PathExpr, Arith, SetQuery, Call]


# -- statements ------------------------------------------------------------------

SET_OPS = ("=", "=+", "=-", "=/")


@dataclass
class SetStmt:
    target: Union[Var, PathExpr]
    op: str
    value: Optional[Expr]
    pos: Pos = _pos()


@dataclass
class VarDecl:
    type: Uri
    name: str
    init: Optional[Expr]
    pos: Pos = _pos()


@dataclass
class If:
    cond: Expr
    then: list["Stmt"]
    orelse: Optional[list["Stmt"]] = None
    pos: Pos = _pos()


@dataclass
class While:
    cond: Expr
    body: list["Stmt"]
    pos: Pos = _pos()


@dataclass
class Return:
    expr: Expr
    pos: Pos = _pos()


@dataclass
class CallStmt:
    call: Call
    pos: Pos = _pos()

    @property
    def inverse(self) -> bool:
        return self.call.inverse


@dataclass
class ExprStmt:
    expr: Expr
    pos: Pos = _pos()


Stmt = Union[SetStmt, VarDecl, If, While, Return, CallStmt, ExprStmt]


# -- declarations ----------------------------------------------------------------


@dataclass
class FieldDecl:
    predicate: Uri
    range: Uri
    min: int = 0
    max: Optional[int] = None  # None: unbounded
    explicit_card: bool = field(default=False, compare=False)
    pos: Pos = _pos()


@dataclass
class Param:
    name: str
    type: Uri
    pos: Pos = _pos()


@dataclass
class MethodDecl:
    name: str
    return_type: Optional[Uri]
    params: list[Param]
    body: list[Stmt]
    pos: Pos = _pos()


@dataclass
class ClassDecl:
    uri: Uri
    super_class: Uri
    fields: list[FieldDecl]
    methods: list[MethodDecl]
    pos: Pos = _pos()

    def method(self, name: str) -> Optional[MethodDecl]:
        for m in self.methods:
            if m.name == name:
                return m
        return None

    def field(self, predicate: Uri) -> Optional[FieldDecl]:
        for f in self.fields:
            if f.predicate == predicate:
                return f
        return None


@dataclass
class NenoUnit:
    prefixes: dict
    classes: list[ClassDecl]

    def cls(self, uri: Uri) -> Optional[ClassDecl]:
        for c in self.classes:
            if c.uri == uri:
                return c
        return None
