"""Tokenizer with Python-style INDENT/DEDENT handling."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import LexicalError

KEYWORDS = frozenset({"def", "return", "for", "in", "if", "elif", "else", "and", "or", "not", "True", "False"})
# Lexed as keywords so the parser can name them in the error.
FORBIDDEN_KEYWORDS = frozenset({
    "import", "from", "while", "try", "except", "finally", "class", "lambda", "with",
    "yield", "break", "continue", "pass", "global", "nonlocal", "raise", "assert",
    "del", "async", "await", "is", "None", "as",
})

TWO_CHAR_OPS = ("==", "!=", "<=", ">=", "+=")
FORBIDDEN_TWO_CHAR = ("//", "**", "-=", "*=", "/=", "->", ":=", "%=", "<<", ">>")
ONE_CHAR_OPS = "()[],:.=<>+-*/"
TAB_WIDTH = 4

_NUMBER = re.compile(r"\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", "'": "'", '"': '"'}


@dataclass(frozen=True)
class Token:
    kind: str  # NAME KEYWORD INT FLOAT STRING OP NEWLINE INDENT DEDENT EOF
    value: object
    line: int
    column: int

    def describe(self) -> str:
        if self.kind in ("OP", "KEYWORD"):
            return repr(self.value)
        return self.kind


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    indents = [0]
    depth = 0
    lines = source.replace("\r\n", "\n").replace("\r", "\n").split("\n")

    def emit(kind, value, line, col):
        tokens.append(Token(kind, value, line, col))

    for lineno, line in enumerate(lines, 1):
        pos = 0
        if depth == 0:
            width = 0
            while pos < len(line) and line[pos] in " \t":
                width += TAB_WIDTH if line[pos] == "\t" else 1
                pos += 1
            rest = line[pos:]
            if not rest.strip() or rest.startswith("#"):
                continue
            if width > indents[-1]:
                indents.append(width)
                emit("INDENT", width, lineno, 1)
            elif width < indents[-1]:
                while width < indents[-1]:
                    indents.pop()
                    emit("DEDENT", width, lineno, 1)
                if width != indents[-1]:
                    raise LexicalError("unindent does not match any outer indentation level", lineno, pos + 1)

        while pos < len(line):
            c = line[pos]
            col = pos + 1
            if c in " \t":
                pos += 1
                continue
            if c == "#":
                break
            if c in "'\"":
                if line.startswith(c * 3, pos):
                    raise LexicalError("triple-quoted strings are not supported", lineno, col)
                value, pos = _read_string(line, pos, lineno)
                emit("STRING", value, lineno, col)
                continue
            if c.isdigit():
                m = _NUMBER.match(line, pos)
                text = m.group(0)
                pos = m.end()
                if pos < len(line) and (line[pos].isalnum() or line[pos] == "_"):
                    raise LexicalError(f"invalid number literal {text + line[pos]!r}", lineno, col)
                if any(ch in text for ch in ".eE"):
                    emit("FLOAT", float(text), lineno, col)
                else:
                    emit("INT", int(text), lineno, col)
                continue
            m = _NAME.match(line, pos)
            if m:
                word = m.group(0)
                pos = m.end()
                kind = "KEYWORD" if word in KEYWORDS or word in FORBIDDEN_KEYWORDS else "NAME"
                emit(kind, word, lineno, col)
                continue
            two = line[pos:pos + 2]
            if two in TWO_CHAR_OPS:
                emit("OP", two, lineno, col)
                pos += 2
                continue
            if two in FORBIDDEN_TWO_CHAR:
                raise LexicalError(f"operator {two!r} is not supported", lineno, col)
            if c in ONE_CHAR_OPS:
                if c in "([":
                    depth += 1
                elif c in ")]":
                    if depth == 0:
                        raise LexicalError(f"unmatched {c!r}", lineno, col)
                    depth -= 1
                emit("OP", c, lineno, col)
                pos += 1
                continue
            raise LexicalError(f"unexpected character {c!r}", lineno, col)

        if depth == 0 and tokens and tokens[-1].kind not in ("NEWLINE", "INDENT", "DEDENT"):
            emit("NEWLINE", None, lineno, len(line) + 1)

    last = len(lines)
    if depth:
        raise LexicalError("unclosed bracket at end of input", last, 1)
    if tokens and tokens[-1].kind not in ("NEWLINE", "DEDENT"):
        emit("NEWLINE", None, last, 1)
    while len(indents) > 1:
        indents.pop()
        emit("DEDENT", 0, last, 1)
    emit("EOF", None, last + 1, 1)
    return tokens


def _read_string(line: str, pos: int, lineno: int) -> tuple[str, int]:
    quote = line[pos]
    out = []
    i = pos + 1
    while i < len(line):
        c = line[i]
        if c == "\\":
            if i + 1 >= len(line):
                break
            esc = line[i + 1]
            if esc not in _ESCAPES:
                raise LexicalError(f"unsupported escape \\{esc}", lineno, i + 1)
            out.append(_ESCAPES[esc])
            i += 2
            continue
        if c == quote:
            return "".join(out), i + 1
        out.append(c)
        i += 1
    raise LexicalError("unterminated string literal", lineno, pos + 1)
