from __future__ import annotations


class NenoError(Exception):
    """Base class for every positioned frontend error."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


class NenoSyntaxError(NenoError):
    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        msg = f"expected {expected}" + (f", found {found!r}" if found else "")
        super().__init__(msg, line, col)
        self.expected = expected
        self.found = found


class UnknownPrefix(NenoError):
    def __init__(self, prefix: str, line: int, col: int = 0):
        super().__init__(f"unknown prefix {prefix!r}", line, col)
        self.prefix = prefix


class TypeCheckError(NenoError):
    pass


class TypeMismatch(TypeCheckError):
    def __init__(self, expected, found, loc=(0, 0)):
        super().__init__(f"type mismatch: expected {expected}, found {found}", *loc)
        self.expected = expected
        self.found = found


class UnknownField(TypeCheckError):
    def __init__(self, predicate, cls, loc=(0, 0)):
        super().__init__(f"{predicate} is not a field of {cls}", *loc)
        self.predicate = predicate
        self.cls = cls


class ArityError(TypeCheckError):
    def __init__(self, method: str, expected: int, found: int, loc=(0, 0)):
        super().__init__(f"{method} takes {expected} argument(s), {found} given", *loc)
        self.method = method
        self.expected = expected
        self.found = found
