"""AST node types for the visual program language.

Nodes are frozen dataclasses holding tuples, so structural equality is plain
``==``. Source positions on statements are excluded from comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


# Expressions


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class FloatLit:
    value: float


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Index:
    target: "Expr"
    index: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # == != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Arith:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and / or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    callee: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class MethodCall:
    receiver: "Expr"
    name: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class Attr:
    receiver: "Expr"
    name: str


Expr = Union[IntLit, FloatLit, StrLit, BoolLit, Var, Index, Compare, Arith, BoolOp, Not, Call, MethodCall, Attr]


# Statements


@dataclass(frozen=True)
class Assign:
    name: str
    value: Expr
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class AugAssign:
    name: str
    value: Expr
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class For:
    var: str
    iterable: Expr
    body: tuple["Stmt", ...]
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class If:
    """``if``/``elif`` chain: ``branches`` pairs each condition with its body."""

    branches: tuple[tuple[Expr, tuple["Stmt", ...]], ...]
    orelse: tuple["Stmt", ...] | None = None
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Return:
    value: Expr
    line: int = field(default=0, compare=False, repr=False)


Stmt = Union[Assign, AugAssign, For, If, Return]


def count_statements(body: tuple[Stmt, ...]) -> int:
    n = 0
    for stmt in body:
        n += 1
        if isinstance(stmt, For):
            n += count_statements(stmt.body)
        elif isinstance(stmt, If):
            for _, b in stmt.branches:
                n += count_statements(b)
            if stmt.orelse:
                n += count_statements(stmt.orelse)
    return n
