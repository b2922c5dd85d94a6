"""Recursive-descent parser for visual programs.

Grammar (see docs/grammar.md for the full EBNF)::

    program    = "def" "execute_command" "(" NAME ")" ":" suite
    stmt       = assign | augassign | return | for | if
    expr       = or_expr
    or_expr    = and_expr { "or" and_expr }
    and_expr   = not_expr { "and" not_expr }
    not_expr   = "not" not_expr | comparison
    comparison = arith [ compop arith ]
    arith      = term { ("+" | "-") term }
    term       = unary { ("*" | "/") unary }
    unary      = "-" unary | postfix
    postfix    = atom { "." NAME [ "(" args ")" ] | "[" expr "]" }
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from . import nodes as n
from .errors import ParseError, StaticError, VPLSyntaxError
from .lexer import FORBIDDEN_KEYWORDS, Token, tokenize

MAX_STATEMENTS = 200
ENTRY_POINT = "execute_command"
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")

_FORBIDDEN_HINTS = {
    "import": "imports are not allowed",
    "from": "imports are not allowed",
    "while": "while-loops are not allowed",
    "try": "try/except is not allowed",
    "except": "try/except is not allowed",
    "lambda": "lambda expressions are not allowed",
    "class": "class definitions are not allowed",
}


@dataclass(frozen=True)
class Program:
    """A parsed, statically checked program.

    Equality compares the parameter name and AST only, so whitespace variants
    of one program compare equal and share ``program_hash``.
    """

    source: str
    param: str
    ast: tuple[n.Stmt, ...]
    program_hash: str

    def __eq__(self, other):
        if not isinstance(other, Program):
            return NotImplemented
        return self.param == other.param and self.ast == other.ast

    def __hash__(self):
        return hash(self.program_hash)


def parse(source: str) -> Program:
    """Parse and check ``source``; raises :class:`ParseError` on rejection."""
    from .checker import check
    from .printer import print_program

    if not isinstance(source, str):
        raise VPLSyntaxError("source must be text")
    try:
        param, body = _Parser(tokenize(source)).program()
    except RecursionError:
        raise VPLSyntaxError("expression nesting is too deep") from None
    if n.count_statements(body) > MAX_STATEMENTS:
        raise StaticError(f"program exceeds {MAX_STATEMENTS} statements")
    check(param, body)
    canonical = print_program(param, body)
    return Program(source, param, body, content_hash(canonical))


def try_parse(source: str) -> Program | ParseError:
    try:
        return parse(source)
    except ParseError as exc:
        return exc


def content_hash(canonical: str) -> str:
    """64-bit content hash as 16 lowercase hex digits."""
    return hashlib.blake2b(canonical.encode("utf-8"), digest_size=8).hexdigest()


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def at(self, kind: str, value=None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def at_op(self, *values: str) -> bool:
        return self.tok.kind == "OP" and self.tok.value in values

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def fail(self, message: str, expected=()):
        t = self.tok
        if t.kind == "KEYWORD" and t.value in FORBIDDEN_KEYWORDS:
            hint = _FORBIDDEN_HINTS.get(t.value, f"{t.value!r} is not supported")
            raise VPLSyntaxError(hint, t.line, t.column)
        raise VPLSyntaxError(f"{message}, found {t.describe()}", t.line, t.column, frozenset(expected))

    def expect(self, kind: str, value=None) -> Token:
        if not self.at(kind, value):
            want = repr(value) if value is not None else kind
            self.fail(f"expected {want}", {want})
        return self.advance()

    def skip_newlines(self):
        while self.at("NEWLINE"):
            self.advance()

    # -- program and statements

    def program(self) -> tuple[str, tuple[n.Stmt, ...]]:
        self.skip_newlines()
        self.expect("KEYWORD", "def")
        name = self.expect("NAME")
        if name.value != ENTRY_POINT:
            raise VPLSyntaxError(f"the program must define {ENTRY_POINT}()", name.line, name.column)
        self.expect("OP", "(")
        param = self.expect("NAME").value
        self.expect("OP", ")")
        self.expect("OP", ":")
        body = self.suite()
        self.skip_newlines()
        if not self.at("EOF"):
            self.fail("expected end of input after the function body", {"EOF"})
        return param, body

    def suite(self) -> tuple[n.Stmt, ...]:
        if not self.at("NEWLINE"):
            return (self.simple_statement(),)
        self.advance()
        self.expect("INDENT")
        body = []
        while not self.at("DEDENT") and not self.at("EOF"):
            body.append(self.statement())
        self.expect("DEDENT")
        return tuple(body)

    def statement(self) -> n.Stmt:
        t = self.tok
        if t.kind == "KEYWORD":
            if t.value == "for":
                return self.for_statement()
            if t.value == "if":
                return self.if_statement()
            if t.value == "def":
                raise VPLSyntaxError("nested function definitions are not allowed", t.line, t.column)
        return self.simple_statement()

    def simple_statement(self) -> n.Stmt:
        t = self.tok
        if self.at("KEYWORD", "return"):
            self.advance()
            stmt = n.Return(self.expr(), line=t.line)
        elif self.at("NAME"):
            name = self.advance().value
            if self.at_op("="):
                self.advance()
                stmt = n.Assign(name, self.expr(), line=t.line)
            elif self.at_op("+="):
                self.advance()
                stmt = n.AugAssign(name, self.expr(), line=t.line)
            else:
                self.fail("expected '=' or '+=' (expression statements are not allowed)", {"'='", "'+='"})
        else:
            self.fail("expected a statement", {"NAME", "'return'", "'for'", "'if'"})
        if not self.at("NEWLINE"):
            self.fail("expected end of line", {"NEWLINE"})
        self.advance()
        return stmt

    def for_statement(self) -> n.For:
        line = self.advance().line
        var = self.expect("NAME").value
        self.expect("KEYWORD", "in")
        iterable = self.expr()
        self.expect("OP", ":")
        return n.For(var, iterable, self.suite(), line=line)

    def if_statement(self) -> n.If:
        line = self.advance().line
        branches = []
        cond = self.expr()
        self.expect("OP", ":")
        branches.append((cond, self.suite()))
        orelse = None
        while self.at("KEYWORD", "elif"):
            self.advance()
            cond = self.expr()
            self.expect("OP", ":")
            branches.append((cond, self.suite()))
        if self.at("KEYWORD", "else"):
            self.advance()
            self.expect("OP", ":")
            orelse = self.suite()
        return n.If(tuple(branches), orelse, line=line)

    # -- expressions

    def expr(self) -> n.Expr:
        left = self.and_expr()
        while self.at("KEYWORD", "or"):
            self.advance()
            left = n.BoolOp("or", left, self.and_expr())
        return left

    def and_expr(self) -> n.Expr:
        left = self.not_expr()
        while self.at("KEYWORD", "and"):
            self.advance()
            left = n.BoolOp("and", left, self.not_expr())
        return left

    def not_expr(self) -> n.Expr:
        if self.at("KEYWORD", "not"):
            self.advance()
            return n.Not(self.not_expr())
        return self.comparison()

    def comparison(self) -> n.Expr:
        left = self.arith()
        if self.at("KEYWORD", "in") or self.at("KEYWORD", "is"):
            self.fail("membership and identity tests are not supported")
        if self.at_op(*COMPARE_OPS):
            op = self.advance().value
            right = self.arith()
            if self.at_op(*COMPARE_OPS):
                t = self.tok
                raise VPLSyntaxError("chained comparisons are not supported", t.line, t.column)
            return n.Compare(op, left, right)
        return left

    def arith(self) -> n.Expr:
        left = self.term()
        while self.at_op("+", "-"):
            op = self.advance().value
            left = n.Arith(op, left, self.term())
        return left

    def term(self) -> n.Expr:
        left = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().value
            left = n.Arith(op, left, self.unary())
        return left

    def unary(self) -> n.Expr:
        if self.at_op("-"):
            self.advance()
            operand = self.unary()
            if isinstance(operand, n.IntLit):
                return n.IntLit(-operand.value)
            if isinstance(operand, n.FloatLit):
                return n.FloatLit(-operand.value)
            return n.Arith("-", n.IntLit(0), operand)
        return self.postfix()

    def postfix(self) -> n.Expr:
        expr = self.atom()
        while True:
            if self.at_op("."):
                self.advance()
                name = self.expect("NAME").value
                if self.at_op("("):
                    expr = n.MethodCall(expr, name, self.call_args())
                else:
                    expr = n.Attr(expr, name)
            elif self.at_op("["):
                self.advance()
                index = self.expr()
                if self.at_op(":"):
                    t = self.tok
                    raise VPLSyntaxError("slicing is not supported", t.line, t.column)
                self.expect("OP", "]")
                expr = n.Index(expr, index)
            elif self.at_op("("):
                t = self.tok
                raise VPLSyntaxError("only builtin functions can be called", t.line, t.column)
            else:
                return expr

    def call_args(self) -> tuple[n.Expr, ...]:
        self.expect("OP", "(")
        args = []
        if not self.at_op(")"):
            while True:
                args.append(self.expr())
                if self.at_op("="):
                    t = self.tok
                    raise VPLSyntaxError("keyword arguments are not supported", t.line, t.column)
                if not self.at_op(","):
                    break
                self.advance()
                if self.at_op(")"):
                    break
        self.expect("OP", ")")
        return tuple(args)

    def atom(self) -> n.Expr:
        t = self.tok
        if t.kind == "INT":
            self.advance()
            return n.IntLit(t.value)
        if t.kind == "FLOAT":
            self.advance()
            return n.FloatLit(t.value)
        if t.kind == "STRING":
            self.advance()
            return n.StrLit(t.value)
        if t.kind == "KEYWORD" and t.value in ("True", "False"):
            self.advance()
            return n.BoolLit(t.value == "True")
        if t.kind == "NAME":
            self.advance()
            if self.at_op("("):
                return n.Call(t.value, self.call_args())
            return n.Var(t.value)
        if self.at_op("("):
            self.advance()
            inner = self.expr()
            if self.at_op(","):
                t = self.tok
                raise VPLSyntaxError("tuples are not supported", t.line, t.column)
            self.expect("OP", ")")
            return inner
        if self.at_op("["):
            raise VPLSyntaxError("list literals and comprehensions are not supported", t.line, t.column)
        self.fail("expected an expression", {"NAME", "INT", "FLOAT", "STRING", "'('", "'True'", "'False'"})
