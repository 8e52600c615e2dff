"""Recursive-descent parser for Neno source files."""

from __future__ import annotations

from typing import Optional

from ..terms import BUILTIN_PREFIXES, XSD, Literal, Uri
from . import ast
from .errors import NenoSyntaxError, UnknownPrefix
from .lexer import Token, tokenize

_MAX_DEPTH = 100

_ESCAPES = {"n": "\n", "r": "\r", "t": "\t", '"': '"', "\\": "\\"}


def _unquote(text: str) -> str:
    body = text[1:-1]
    out, i = [], 0
    while i < len(body):
        if body[i] == "\\":
            out.append(_ESCAPES[body[i + 1]])
            i += 2
        else:
            out.append(body[i])
            i += 1
    return "".join(out)


class Parser:
    def __init__(self, source: str, prefixes: Optional[dict] = None):
        self.tokens = tokenize(source)
        self.i = 0
        self.prefixes: dict = dict(prefixes or {})
        self.depth = 0

    # -- token helpers -----------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, expected: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise NenoSyntaxError(tok.line, tok.col, expected, tok.text or "end of input")

    def is_op(self, text: str, tok: Optional[Token] = None) -> bool:
        tok = tok or self.tok
        return tok.kind == "op" and tok.text == text

    def is_kw(self, text: str) -> bool:
        return self.tok.kind == "kw" and self.tok.text == text

    def expect_op(self, text: str) -> Token:
        if not self.is_op(text):
            self.error(f"'{text}'")
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error("an identifier")
        return self.advance()

    def is_name(self, tok: Optional[Token] = None) -> bool:
        tok = tok or self.tok
        return tok.kind in ("qname", "iri")

    def name(self) -> Uri:
        """A qualified name or bracketed IRI, resolved to a Uri."""
        tok = self.tok
        if tok.kind == "iri":
            self.advance()
            try:
                return Uri(tok.text[1:-1])
            except ValueError:
                self.error("an absolute IRI", tok)
        if tok.kind == "qname":
            self.advance()
            pfx, local = tok.text.split(":", 1)
            base = self.prefixes.get(pfx)
            if base is None:
                base = BUILTIN_PREFIXES.get(pfx)
            if base is None:
                raise UnknownPrefix(pfx, tok.line, tok.col)
            return Uri(base + local)
        self.error("a qualified name")

    def nested(self):
        self.depth += 1
        if self.depth > _MAX_DEPTH:
            raise NenoSyntaxError(self.tok.line, self.tok.col, "shallower nesting", self.tok.text)

    def unnest(self):
        self.depth -= 1

    # -- declarations -----------------------------------------------------------

    def unit(self) -> ast.NenoUnit:
        declared = {}
        while self.is_kw("prefix"):
            self.advance()
            tok = self.tok
            if tok.kind != "qname" or not tok.text.endswith(":"):
                self.error("a prefix name such as 'foaf:'")
            self.advance()
            pfx = tok.text[:-1]
            if pfx in declared:
                raise NenoSyntaxError(tok.line, tok.col, "a new prefix name", f"duplicate prefix {pfx}")
            iri_tok = self.tok
            if iri_tok.kind != "iri":
                self.error("a prefix IRI in <...>")
            self.advance()
            declared[pfx] = iri_tok.text[1:-1]
            self.prefixes[pfx] = declared[pfx]
            self.expect_op(";")
        classes = []
        while self.tok.kind != "eof":
            classes.append(self.class_decl())
        if not classes:
            self.error("a class declaration")
        return ast.NenoUnit(prefixes=declared, classes=classes)

    def class_decl(self) -> ast.ClassDecl:
        start = self.tok
        super_class = self.name()
        uri = self.name()
        self.expect_op("{")
        fields, methods = [], []
        while not self.is_op("}"):
            if self.tok.kind == "eof":
                self.error("'}'")
            if self.tok.kind == "ident":
                methods.append(self.method_decl(None, self.tok))
            elif self.is_name():
                first = self.tok
                type_uri = self.name()
                if self.is_name():
                    fields.append(self.field_decl(type_uri, first))
                elif self.tok.kind == "ident":
                    methods.append(self.method_decl(type_uri, first))
                else:
                    self.error("a field predicate or method name")
            else:
                self.error("a field or method declaration")
        self.expect_op("}")
        return ast.ClassDecl(uri, super_class, fields, methods, pos=(start.line, start.col))

    def field_decl(self, range_uri: Uri, start: Token) -> ast.FieldDecl:
        predicate = self.name()
        lo, hi, explicit = 0, None, False
        if self.is_op("["):
            self.advance()
            explicit = True
            lo = self.integer()
            hi = lo
            if self.is_op(".."):
                self.advance()
                if self.is_op("*"):
                    self.advance()
                    hi = None
                else:
                    hi = self.integer()
            close = self.expect_op("]")
            if hi is not None and lo > hi:
                raise NenoSyntaxError(close.line, close.col, "min <= max in cardinality", f"[{lo}..{hi}]")
        self.expect_op(";")
        return ast.FieldDecl(predicate, range_uri, lo, hi, explicit, pos=(start.line, start.col))

    def integer(self) -> int:
        if self.tok.kind != "int":
            self.error("an integer")
        return int(self.advance().text)

    def method_decl(self, return_type: Optional[Uri], start: Token) -> ast.MethodDecl:
        name = self.expect_ident().text
        self.expect_op("(")
        params = []
        if not self.is_op(")"):
            while True:
                ptok = self.tok
                ptype = self.name()
                pname = self.expect_ident().text
                params.append(ast.Param(pname, ptype, pos=(ptok.line, ptok.col)))
                if not self.is_op(","):
                    break
                self.advance()
        self.expect_op(")")
        body = self.block()
        return ast.MethodDecl(name, return_type, params, body, pos=(start.line, start.col))

    # -- statements -------------------------------------------------------------

    def block(self) -> list:
        self.expect_op("{")
        self.nested()
        stmts = []
        while not self.is_op("}"):
            if self.tok.kind == "eof":
                self.error("'}'")
            stmts.append(self.statement())
        self.advance()
        self.unnest()
        return stmts

    def statement(self):
        tok = self.tok
        pos = (tok.line, tok.col)
        if self.is_kw("if"):
            return self.if_stmt()
        if self.is_kw("while"):
            self.advance()
            self.expect_op("(")
            cond = self.expr()
            self.expect_op(")")
            return ast.While(cond, self.block(), pos=pos)
        if self.is_kw("return"):
            self.advance()
            value = self.expr()
            self.expect_op(";")
            return ast.Return(value, pos=pos)
        if self.is_name() and self.peek().kind == "ident" and not self.is_op("(", self.peek(2)):
            var_type = self.name()
            name = self.expect_ident().text
            init = None
            if self.is_op("="):
                self.advance()
                init = self.expr()
            self.expect_op(";")
            return ast.VarDecl(var_type, name, init, pos=pos)
        target = self.expr()
        if self.tok.kind == "op" and self.tok.text in ast.SET_OPS:
            op_tok = self.advance()
            if not self._assignable(target):
                raise NenoSyntaxError(op_tok.line, op_tok.col, "a variable or forward field path before the operator", op_tok.text)
            value = None if op_tok.text == "=/" else self.expr()
            self.expect_op(";")
            return ast.SetStmt(target, op_tok.text, value, pos=pos)
        self.expect_op(";")
        if isinstance(target, ast.Call):
            return ast.CallStmt(target, pos=pos)
        return ast.ExprStmt(target, pos=pos)

    @staticmethod
    def _assignable(target) -> bool:
        if isinstance(target, ast.Var):
            return True
        return isinstance(target, ast.PathExpr) and bool(target.steps) and not target.steps[-1].inverse

    def if_stmt(self):
        tok = self.advance()
        self.expect_op("(")
        cond = self.expr()
        self.expect_op(")")
        then = self.block()
        orelse = None
        if self.is_kw("else"):
            self.advance()
            if self.is_kw("if"):
                self.nested()
                orelse = [self.if_stmt()]
                self.unnest()
            else:
                orelse = self.block()
        return ast.If(cond, then, orelse, pos=(tok.line, tok.col))

    # -- expressions ------------------------------------------------------------

    def expr(self):
        self.nested()
        lhs = self.additive()
        if self.is_op("=?"):
            op_tok = self.advance()
            if not self._assignable(lhs):
                raise NenoSyntaxError(op_tok.line, op_tok.col, "a variable or forward field path before '=?'", "=?")
            rhs = self.additive()
            lhs = ast.SetQuery(lhs, rhs, pos=lhs.pos)
        self.unnest()
        return lhs

    def additive(self):
        lhs = self.multiplicative()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.advance().text
            lhs = ast.Arith(op, lhs, self.multiplicative(), pos=lhs.pos)
        return lhs

    def multiplicative(self):
        lhs = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            lhs = ast.Arith(op, lhs, self.unary(), pos=lhs.pos)
        return lhs

    def unary(self):
        if self.is_op("-"):
            tok = self.advance()
            if self.tok.kind in ("int", "dec"):
                num = self.advance()
                dt = "int" if num.kind == "int" else "double"
                return ast.Const(Literal("-" + num.text, XSD + dt), pos=(tok.line, tok.col))
            self.nested()
            operand = self.unary()
            self.unnest()
            zero = ast.Const(Literal("0", XSD + "int"), pos=(tok.line, tok.col))
            return ast.Arith("-", zero, operand, pos=(tok.line, tok.col))
        return self.postfix()

    def postfix(self):
        base = self.primary()
        if not isinstance(base, (ast.This, ast.Var, ast.Const)):
            return base
        steps = []
        while self.is_op(".") or self.is_op(".."):
            dot = self.advance()
            inverse = dot.text == ".."
            if not inverse and self.tok.kind == "ident" and self.is_op("(", self.peek()):
                receiver = ast.PathExpr(base, steps, pos=base.pos) if steps else base
                name_tok = self.advance()
                args = self.arguments()
                return ast.Call(receiver, name_tok.text, args, pos=base.pos)
            if not self.is_name():
                self.error("a field predicate" if inverse else "a field predicate or method call")
            step_tok = self.tok
            steps.append(ast.Step(self.name(), inverse, pos=(step_tok.line, step_tok.col)))
        if steps:
            return ast.PathExpr(base, steps, pos=base.pos)
        return base

    def arguments(self) -> list:
        self.expect_op("(")
        args = []
        if not self.is_op(")"):
            while True:
                args.append(self.expr())
                if not self.is_op(","):
                    break
                self.advance()
        self.expect_op(")")
        return args

    def primary(self):
        tok = self.tok
        pos = (tok.line, tok.col)
        if self.is_kw("this"):
            self.advance()
            return ast.This(pos=pos)
        if self.is_kw("true") or self.is_kw("false"):
            self.advance()
            return ast.Const(Literal(tok.text, XSD + "boolean"), pos=pos)
        if tok.kind == "ident":
            self.advance()
            if self.is_op("("):
                return ast.Call(None, tok.text, self.arguments(), pos=pos)
            return ast.Var(tok.text, pos=pos)
        if self.is_name():
            return ast.Const(self.name(), pos=pos)
        if tok.kind == "int":
            self.advance()
            return ast.Const(Literal(tok.text, XSD + "int"), pos=pos)
        if tok.kind == "dec":
            self.advance()
            return ast.Const(Literal(tok.text, XSD + "double"), pos=pos)
        if tok.kind == "string":
            self.advance()
            return ast.Const(Literal(_unquote(tok.text)), pos=pos)
        if self.is_op("("):
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return inner
        self.error("an expression")


def parse(source: str) -> ast.NenoUnit:
    """Parse a complete ``.neno`` compilation unit."""
    return Parser(source).unit()


def parse_expression(source: str, prefixes: Optional[dict] = None):
    """Parse a single expression, optionally followed by ``;``."""
    p = Parser(source, prefixes)
    e = p.expr()
    if p.is_op(";"):
        p.advance()
    if p.tok.kind != "eof":
        p.error("end of expression")
    return e
