"""Frontend for the Neno object language: lexer, parser, printer and checker."""

from .ast import NenoUnit
from .errors import ArityError, NenoError, NenoSyntaxError, TypeCheckError, TypeMismatch, UnknownField, UnknownPrefix
from .parser import parse, parse_expression
from .printer import print_expr, print_unit
from .typecheck import CheckedUnit, UnknownMethod, UnknownVariable, typecheck

__all__ = [
    "ArityError",
    "CheckedUnit",
    "NenoError",
    "NenoSyntaxError",
    "NenoUnit",
    "TypeCheckError",
    "TypeMismatch",
    "UnknownField",
    "UnknownMethod",
    "UnknownPrefix",
    "UnknownVariable",
    "parse",
    "parse_expression",
    "print_expr",
    "print_unit",
    "typecheck",
]
