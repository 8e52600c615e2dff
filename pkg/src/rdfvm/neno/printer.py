"""Render a NenoUnit back to source text (``parse(print_unit(u)) == u``)."""

from __future__ import annotations

import re

from ..terms import XSD, Literal, Uri, compact_iri
from . import ast

_LOCAL = re.compile(r"[A-Za-z0-9_\-]*")


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t") + '"'


class Printer:
    def __init__(self, prefixes: dict):
        self.prefixes = prefixes

    def name(self, uri: Uri) -> str:
        short = compact_iri(uri.iri, self.prefixes, local_ok=_LOCAL.fullmatch)
        return short if short is not None else str(uri)

    def const(self, term) -> str:
        if isinstance(term, Uri):
            return self.name(term)
        if isinstance(term, Literal):
            if term.datatype in (XSD + "int", XSD + "double", XSD + "boolean"):
                return term.lexical
            return _quote(term.lexical)
        raise TypeError(term)

    def expr(self, e) -> str:
        if isinstance(e, ast.This):
            return "this"
        if isinstance(e, ast.Var):
            return e.name
        if isinstance(e, ast.Const):
            return self.const(e.term)
        if isinstance(e, ast.PathExpr):
            out = self.expr(e.base)
            for s in e.steps:
                out += (".." if s.inverse else ".") + self.name(s.predicate)
            return out
        if isinstance(e, ast.Arith):
            return f"({self.expr(e.lhs)} {e.op} {self.expr(e.rhs)})"
        if isinstance(e, ast.SetQuery):
            return f"({self.expr(e.target)} =? {self.expr(e.value)})"
        if isinstance(e, ast.Call):
            args = ", ".join(self.expr(a) for a in e.args)
            if e.receiver is None:
                return f"{e.method}({args})"
            return f"{self.expr(e.receiver)}.{e.method}({args})"
        raise TypeError(e)

    def stmts(self, body, indent: int) -> list[str]:
        lines = []
        for s in body:
            lines.extend(self.stmt(s, indent))
        return lines

    def stmt(self, s, indent: int) -> list[str]:
        pad = "  " * indent
        if isinstance(s, ast.SetStmt):
            if s.op == "=/":
                return [f"{pad}{self.expr(s.target)} =/;"]
            return [f"{pad}{self.expr(s.target)} {s.op} {self.expr(s.value)};"]
        if isinstance(s, ast.VarDecl):
            init = f" = {self.expr(s.init)}" if s.init is not None else ""
            return [f"{pad}{self.name(s.type)} {s.name}{init};"]
        if isinstance(s, ast.Return):
            return [f"{pad}return {self.expr(s.expr)};"]
        if isinstance(s, ast.CallStmt):
            return [f"{pad}{self.expr(s.call)};"]
        if isinstance(s, ast.ExprStmt):
            return [f"{pad}{self.expr(s.expr)};"]
        if isinstance(s, ast.While):
            return [f"{pad}while ({self.expr(s.cond)}) {{", *self.stmts(s.body, indent + 1), f"{pad}}}"]
        if isinstance(s, ast.If):
            lines = [f"{pad}if ({self.expr(s.cond)}) {{", *self.stmts(s.then, indent + 1)]
            if s.orelse is None:
                lines.append(f"{pad}}}")
            else:
                lines.append(f"{pad}}} else {{")
                lines.extend(self.stmts(s.orelse, indent + 1))
                lines.append(f"{pad}}}")
            return lines
        raise TypeError(s)

    def unit(self, u: ast.NenoUnit) -> str:
        lines = [f"prefix {p}: <{iri}>;" for p, iri in u.prefixes.items()]
        if lines:
            lines.append("")
        for c in u.classes:
            lines.append(f"{self.name(c.super_class)} {self.name(c.uri)} {{")
            for f in c.fields:
                lines.append(f"  {self.name(f.range)} {self.name(f.predicate)}{_card(f)};")
            for m in c.methods:
                ret = f"{self.name(m.return_type)} " if m.return_type is not None else ""
                params = ", ".join(f"{self.name(p.type)} {p.name}" for p in m.params)
                lines.append("")
                lines.append(f"  {ret}{m.name}({params}) {{")
                lines.extend(self.stmts(m.body, 2))
                lines.append("  }")
            lines.append("}")
            lines.append("")
        return "\n".join(lines)


def _card(f: ast.FieldDecl) -> str:
    if f.min == 0 and f.max is None:
        return "[0..*]" if f.explicit_card else ""
    if f.max is None:
        return f"[{f.min}..*]"
    if f.min == f.max:
        return f"[{f.min}]"
    return f"[{f.min}..{f.max}]"


def print_unit(unit: ast.NenoUnit) -> str:
    return Printer(unit.prefixes).unit(unit)


def print_expr(expr, prefixes: dict) -> str:
    return Printer(prefixes).expr(expr)
