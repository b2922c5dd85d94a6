"""Canonical pretty-printer: 4-space indentation, minimal parentheses."""

from __future__ import annotations

import math

from . import nodes as n

INDENT = "    "

_BOOL_PREC = {"or": 1, "and": 2}
_ARITH_PREC = {"+": 5, "-": 5, "*": 6, "/": 6}
_NOT, _COMPARE, _UNARY, _POSTFIX, _ATOM = 3, 4, 7, 8, 9


def pretty_print(program) -> str:
    return print_program(program.param, program.ast)


def print_program(param: str, body) -> str:
    lines = [f"def execute_command({param}):"]
    _block(body, 1, lines)
    return "\n".join(lines) + "\n"


def _block(body, depth: int, lines: list[str]) -> None:
    pad = INDENT * depth
    for stmt in body:
        if isinstance(stmt, n.Assign):
            lines.append(f"{pad}{stmt.name} = {expr_str(stmt.value)}")
        elif isinstance(stmt, n.AugAssign):
            lines.append(f"{pad}{stmt.name} += {expr_str(stmt.value)}")
        elif isinstance(stmt, n.Return):
            lines.append(f"{pad}return {expr_str(stmt.value)}")
        elif isinstance(stmt, n.For):
            lines.append(f"{pad}for {stmt.var} in {expr_str(stmt.iterable)}:")
            _block(stmt.body, depth + 1, lines)
        elif isinstance(stmt, n.If):
            for i, (cond, branch) in enumerate(stmt.branches):
                kw = "if" if i == 0 else "elif"
                lines.append(f"{pad}{kw} {expr_str(cond)}:")
                _block(branch, depth + 1, lines)
            if stmt.orelse is not None:
                lines.append(f"{pad}else:")
                _block(stmt.orelse, depth + 1, lines)
        else:
            raise TypeError(f"not a statement: {stmt!r}")


def _prec(e: n.Expr) -> int:
    if isinstance(e, n.BoolOp):
        return _BOOL_PREC[e.op]
    if isinstance(e, n.Not):
        return _NOT
    if isinstance(e, n.Compare):
        return _COMPARE
    if isinstance(e, n.Arith):
        return _ARITH_PREC[e.op]
    if isinstance(e, (n.IntLit, n.FloatLit)) and (e.value < 0 or math.copysign(1, e.value) < 0):
        return _UNARY
    if isinstance(e, (n.Index, n.Call, n.MethodCall, n.Attr)):
        return _POSTFIX
    return _ATOM


def expr_str(e: n.Expr, min_prec: int = 0) -> str:
    text = _render(e)
    return f"({text})" if _prec(e) < min_prec else text


def _receiver(e: n.Expr) -> str:
    # "1.left" would lex as a malformed float
    if isinstance(e, (n.IntLit, n.FloatLit)):
        return f"({_render(e)})"
    return expr_str(e, _POSTFIX)


def _render(e: n.Expr) -> str:
    if isinstance(e, n.BoolLit):
        return "True" if e.value else "False"
    if isinstance(e, n.IntLit):
        return str(e.value)
    if isinstance(e, n.FloatLit):
        if math.isinf(e.value):
            return "1e999" if e.value > 0 else "-1e999"
        return repr(e.value)
    if isinstance(e, n.StrLit):
        return _quote(e.value)
    if isinstance(e, n.Var):
        return e.name
    if isinstance(e, n.BoolOp):
        p = _BOOL_PREC[e.op]
        return f"{expr_str(e.left, p)} {e.op} {expr_str(e.right, p + 1)}"
    if isinstance(e, n.Not):
        return f"not {expr_str(e.operand, _NOT)}"
    if isinstance(e, n.Compare):
        return f"{expr_str(e.left, _COMPARE + 1)} {e.op} {expr_str(e.right, _COMPARE + 1)}"
    if isinstance(e, n.Arith):
        p = _ARITH_PREC[e.op]
        return f"{expr_str(e.left, p)} {e.op} {expr_str(e.right, p + 1)}"
    if isinstance(e, n.Index):
        return f"{_receiver(e.target)}[{expr_str(e.index)}]"
    if isinstance(e, n.Call):
        return f"{e.callee}({', '.join(expr_str(a) for a in e.args)})"
    if isinstance(e, n.MethodCall):
        return f"{_receiver(e.receiver)}.{e.name}({', '.join(expr_str(a) for a in e.args)})"
    if isinstance(e, n.Attr):
        return f"{_receiver(e.receiver)}.{e.name}"
    raise TypeError(f"not an expression: {e!r}")


def _quote(s: str) -> str:
    body = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{body}"'
