from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import NenoSyntaxError

KEYWORDS = {"prefix", "this", "if", "else", "while", "return", "true", "false"}

# Longest operators first.
OPERATORS = ["..", "=+", "=-", "=/", "=?", "=", "+", "-", "*", "/", ".", ";", ",", "{", "}", "(", ")", "[", "]"]

_SPEC = [
    ("ws", r"[ \t\r\n]+"),
    ("comment", r"//[^\n]*|/\*(?:[^*]|\*(?!/))*\*/"),
    ("iri", r"<[^<>\"{}|^`\\\s]*>"),
    ("qname", r"[A-Za-z_][A-Za-z0-9_\-]*:[A-Za-z0-9_\-]*"),
    ("ident", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("dec", r"[0-9]+\.[0-9]+"),
    ("int", r"[0-9]+"),
    ("string", r'"(?:[^"\\\n]|\\[nrt"\\])*"'),
    ("op", "|".join(re.escape(o) for o in OPERATORS)),
]
_MASTER = re.compile("|".join(f"(?P<{name}>{rx})" for name, rx in _SPEC))


@dataclass(frozen=True)
class Token:
    kind: str  # iri qname ident kw dec int string op eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    n = len(source)
    while pos < n:
        m = _MASTER.match(source, pos)
        if not m or m.end() == pos:
            if source.startswith("/*", pos):
                raise NenoSyntaxError(line, pos - line_start + 1, "'*/' closing comment", "/*")
            if source[pos] == '"':
                raise NenoSyntaxError(line, pos - line_start + 1, "closing '\"'", source[pos])
            raise NenoSyntaxError(line, pos - line_start + 1, "a token", source[pos])
        kind = m.lastgroup
        text = m.group(0)
        col = pos - line_start + 1
        if kind not in ("ws", "comment"):
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens
