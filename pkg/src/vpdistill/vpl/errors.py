from __future__ import annotations


class ParseError(Exception):
    """A program rejected by the lexer, parser or static checker.

    ``kind`` is one of ``"lexical"``, ``"syntax"`` or ``"static"``. ``expected``
    holds the token descriptions that would have been accepted, when known.
    """

    kind = "syntax"

    def __init__(self, message: str, line: int = 0, column: int = 0, expected: frozenset[str] = frozenset()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.line and self.column:
            loc = f"line {self.line}, column {self.column}: "
        elif self.line:
            loc = f"line {self.line}: "
        else:
            loc = ""
        exp = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        return f"{self.kind} error: {loc}{self.message}{exp}"


class LexicalError(ParseError):
    kind = "lexical"


class VPLSyntaxError(ParseError):
    kind = "syntax"


class StaticError(ParseError):
    kind = "static"
