"""Static checks: closed builtin set, arity, definite assignment, return paths."""

from __future__ import annotations

from . import nodes as n
from .builtins import FUNCTIONS, PATCH_ATTRIBUTES, PATCH_METHODS
from .errors import StaticError


def check(param: str, body: tuple[n.Stmt, ...]) -> None:
    if param in FUNCTIONS:
        raise StaticError(f"parameter name {param!r} shadows a builtin")
    _block(body, frozenset({param}))
    if not _always_returns(body):
        raise StaticError("not every path through execute_command returns a value")


def _block(body, assigned: frozenset[str]) -> frozenset[str]:
    for stmt in body:
        assigned = _stmt(stmt, assigned)
    return assigned


def _stmt(stmt: n.Stmt, assigned: frozenset[str]) -> frozenset[str]:
    line = getattr(stmt, "line", 0)
    if isinstance(stmt, n.Assign):
        _expr(stmt.value, assigned, line)
        _target(stmt.name, line)
        return assigned | {stmt.name}
    if isinstance(stmt, n.AugAssign):
        if stmt.name not in assigned:
            raise StaticError(f"variable {stmt.name!r} is used before assignment", line)
        _expr(stmt.value, assigned, line)
        return assigned
    if isinstance(stmt, n.Return):
        _expr(stmt.value, assigned, line)
        return assigned
    if isinstance(stmt, n.For):
        _expr(stmt.iterable, assigned, line)
        _target(stmt.var, line)
        _block(stmt.body, assigned | {stmt.var})
        # The body may run zero times.
        return assigned
    if isinstance(stmt, n.If):
        outs = []
        branches = list(stmt.branches)
        for cond, branch in branches:
            _expr(cond, assigned, line)
            out = _block(branch, assigned)
            if not _always_returns(branch):
                outs.append(out)
        if stmt.orelse is None:
            return assigned
        out = _block(stmt.orelse, assigned)
        if not _always_returns(stmt.orelse):
            outs.append(out)
        if not outs:
            return assigned
        result = outs[0]
        for o in outs[1:]:
            result &= o
        return result
    raise StaticError(f"unknown statement {type(stmt).__name__}", line)


def _target(name: str, line: int) -> None:
    if name in FUNCTIONS:
        raise StaticError(f"cannot assign to builtin {name!r}", line)


def _expr(e: n.Expr, assigned: frozenset[str], line: int) -> None:
    if isinstance(e, (n.IntLit, n.FloatLit, n.StrLit, n.BoolLit)):
        return
    if isinstance(e, n.Var):
        if e.name in FUNCTIONS:
            raise StaticError(f"builtin {e.name!r} must be called", line)
        if e.name not in assigned:
            raise StaticError(f"variable {e.name!r} is used before assignment", line)
        return
    if isinstance(e, n.Index):
        _expr(e.target, assigned, line)
        _expr(e.index, assigned, line)
    elif isinstance(e, (n.Compare, n.Arith, n.BoolOp)):
        _expr(e.left, assigned, line)
        _expr(e.right, assigned, line)
    elif isinstance(e, n.Not):
        _expr(e.operand, assigned, line)
    elif isinstance(e, n.Call):
        if e.callee not in FUNCTIONS:
            raise StaticError(f"unknown builtin {e.callee!r}", line)
        _arity(e.callee, FUNCTIONS[e.callee], len(e.args), line)
        for a in e.args:
            _expr(a, assigned, line)
    elif isinstance(e, n.MethodCall):
        if e.name not in PATCH_METHODS:
            raise StaticError(f"unknown builtin {e.name!r}", line)
        _arity(e.name, PATCH_METHODS[e.name], len(e.args), line)
        _expr(e.receiver, assigned, line)
        for a in e.args:
            _expr(a, assigned, line)
    elif isinstance(e, n.Attr):
        if e.name not in PATCH_ATTRIBUTES:
            raise StaticError(f"unknown attribute {e.name!r}", line)
        _expr(e.receiver, assigned, line)
    else:
        raise StaticError(f"unknown expression {type(e).__name__}", line)


def _arity(name: str, want: int, got: int, line: int) -> None:
    if want != got:
        raise StaticError(f"{name}() takes {want} argument(s), {got} given", line)


def _always_returns(body) -> bool:
    for stmt in body:
        if isinstance(stmt, n.Return):
            return True
        if isinstance(stmt, n.If) and stmt.orelse is not None:
            if all(_always_returns(b) for _, b in stmt.branches) and _always_returns(stmt.orelse):
                return True
    return False
