"""Tree-walking execution engine with tool-call tracing.

``execute`` evaluates a parsed program against one visual input. Every call
to a vision or knowledge tool is appended to the trace with its receiver,
rendered arguments and rendered result. Runtime failures of any kind end
evaluation with a ``Failed`` outcome; ``execute`` itself never raises for a
bad program.

Types are strict: conditions must be booleans, arithmetic mixes only ints and
floats (``+`` also joins two strings), and ``/`` always yields a float.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

from .tools.registry import ToolError
from .values import PatchHandle, ProgramError, VisualInput, render_box, render_value, type_name
from .vpl import nodes as n
from .vpl.builtins import PATCH_ATTRIBUTES, TRACED_TOOLS
from .vpl.parser import Program

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10_000

FAILURE_KINDS = (
    "type-error",
    "index-out-of-bounds",
    "value-error",
    "arithmetic-error",
    "step-budget",
    "tool-error",
    "internal-error",
)


@dataclass(frozen=True)
class TraceEntry:
    step: int
    tool: str
    receiver: dict | None
    args: tuple[str, ...]
    result: str

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "tool": self.tool,
            "receiver": self.receiver,
            "args": list(self.args),
            "result": self.result,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEntry":
        return cls(d["step"], d["tool"], d["receiver"], tuple(d["args"]), d["result"])


@dataclass(frozen=True)
class Returned:
    value: str

    def to_dict(self):
        return {"status": "returned", "value": self.value}


@dataclass(frozen=True)
class Failed:
    error_kind: str
    message: str
    step: int

    def to_dict(self):
        return {"status": "failed", "error_kind": self.error_kind, "message": self.message, "step": self.step}


@dataclass(frozen=True)
class ExecutionTrace:
    entries: tuple[TraceEntry, ...]
    outcome: Returned | Failed
    step_budget_used: int

    @property
    def ok(self) -> bool:
        return isinstance(self.outcome, Returned)

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "outcome": self.outcome.to_dict(),
            "step_budget_used": self.step_budget_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExecutionTrace":
        o = d["outcome"]
        if o["status"] == "returned":
            outcome = Returned(o["value"])
        else:
            outcome = Failed(o["error_kind"], o["message"], o["step"])
        return cls(tuple(TraceEntry.from_dict(e) for e in d["entries"]), outcome, d["step_budget_used"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    def dump_lines(self) -> str:
        """Debug dump: one JSON object per trace entry, then the outcome."""
        lines = [json.dumps(e.to_dict(), ensure_ascii=False) for e in self.entries]
        lines.append(json.dumps({**self.outcome.to_dict(), "step_budget_used": self.step_budget_used}))
        return "\n".join(lines) + "\n"


def _receiver_info(p: PatchHandle) -> dict:
    return {"patch_id": p.patch_id, "box": render_box(p), "label": p.label}


class _BudgetExceeded(Exception):
    pass


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Machine:
    def __init__(self, tools, budget: int):
        self.tools = tools
        self.budget = budget
        self.steps = 0
        self.entries: list[TraceEntry] = []
        self.call_counts: dict[str, int] = {}
        self.env: dict = {}

    def tick(self):
        self.steps += 1
        if self.steps > self.budget:
            raise _BudgetExceeded()

    # statements

    def run_block(self, body):
        for stmt in body:
            self.run_stmt(stmt)

    def run_stmt(self, s):
        self.tick()
        if isinstance(s, n.Assign):
            self.env[s.name] = self.eval(s.value)
        elif isinstance(s, n.AugAssign):
            self.env[s.name] = self.arith("+", self.env[s.name], self.eval(s.value))
        elif isinstance(s, n.Return):
            raise _Return(self.eval(s.value))
        elif isinstance(s, n.For):
            seq = self.eval(s.iterable)
            if not isinstance(seq, list):
                raise ProgramError("type-error", f"cannot iterate over {type_name(seq)}")
            for item in list(seq):
                self.env[s.var] = item
                self.run_block(s.body)
        elif isinstance(s, n.If):
            for cond, body in s.branches:
                if self.truth(self.eval(cond), "if condition"):
                    self.run_block(body)
                    return
            if s.orelse is not None:
                self.run_block(s.orelse)
        else:  # pragma: no cover
            raise TypeError(f"unknown statement {s!r}")

    # expressions

    @staticmethod
    def truth(v, what):
        if not isinstance(v, bool):
            raise ProgramError("type-error", f"{what} must be bool, got {type_name(v)}")
        return v

    def eval(self, e):
        self.tick()
        if isinstance(e, (n.IntLit, n.FloatLit, n.StrLit, n.BoolLit)):
            return e.value
        if isinstance(e, n.Var):
            return self.env[e.name]
        if isinstance(e, n.Arith):
            return self.arith(e.op, self.eval(e.left), self.eval(e.right))
        if isinstance(e, n.Compare):
            return self.compare(e.op, self.eval(e.left), self.eval(e.right))
        if isinstance(e, n.BoolOp):
            left = self.truth(self.eval(e.left), f"'{e.op}' operand")
            if e.op == "and" and not left:
                return False
            if e.op == "or" and left:
                return True
            return self.truth(self.eval(e.right), f"'{e.op}' operand")
        if isinstance(e, n.Not):
            return not self.truth(self.eval(e.operand), "'not' operand")
        if isinstance(e, n.Index):
            return self.index(self.eval(e.target), self.eval(e.index))
        if isinstance(e, n.Attr):
            recv = self.eval(e.receiver)
            if not isinstance(recv, PatchHandle) or e.name not in PATCH_ATTRIBUTES:
                raise ProgramError("type-error", f"{type_name(recv)} has no attribute {e.name!r}")
            return getattr(recv, e.name)
        if isinstance(e, n.MethodCall):
            recv = self.eval(e.receiver)
            args = tuple(self.eval(a) for a in e.args)
            return self.call(e.name, recv, args)
        if isinstance(e, n.Call):
            args = tuple(self.eval(a) for a in e.args)
            return self.call(e.callee, None, args)
        raise TypeError(f"unknown expression {e!r}")  # pragma: no cover

    @staticmethod
    def arith(op, a, b):
        if op == "+" and isinstance(a, str) and isinstance(b, str):
            return a + b
        for v in (a, b):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ProgramError("type-error", f"unsupported operand for {op}: {type_name(a)} and {type_name(b)}")
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        else:
            if b == 0:
                raise ProgramError("arithmetic-error", "division by zero")
            r = a / b
        if isinstance(r, float) and not math.isfinite(r):
            raise ProgramError("arithmetic-error", f"non-finite result of {op}")
        return r

    @staticmethod
    def compare(op, a, b):
        def numeric(v):
            return isinstance(v, (int, float)) and not isinstance(v, bool)

        if numeric(a) and numeric(b):
            pass
        elif isinstance(a, str) and isinstance(b, str):
            pass
        elif isinstance(a, bool) and isinstance(b, bool) and op in ("==", "!="):
            pass
        else:
            raise ProgramError("type-error", f"cannot compare {type_name(a)} {op} {type_name(b)}")
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b

    @staticmethod
    def index(target, i):
        if not isinstance(target, (list, str)):
            raise ProgramError("type-error", f"{type_name(target)} is not indexable")
        if isinstance(i, bool) or not isinstance(i, int):
            raise ProgramError("type-error", f"index must be int, got {type_name(i)}")
        if not -len(target) <= i < len(target):
            raise ProgramError("index-out-of-bounds", f"index {i} out of range for length {len(target)}")
        return target[i]

    def call(self, name, receiver, args):
        idx = self.call_counts.get(name, 0)
        self.call_counts[name] = idx + 1
        if name not in TRACED_TOOLS:
            return self.tools.call(name, receiver, args, idx)
        step = len(self.entries) + 1
        recv_info = _receiver_info(receiver) if isinstance(receiver, PatchHandle) else None
        rendered_args = tuple(render_value(a) for a in args)
        try:
            result = self.tools.call(name, receiver, args, idx)
        except (ToolError, ProgramError) as exc:
            kind = getattr(exc, "kind", "tool-error")
            self.entries.append(TraceEntry(step, name, recv_info, rendered_args, f"<error: {kind}>"))
            raise
        self.entries.append(TraceEntry(step, name, recv_info, rendered_args, render_value(result)))
        return result


def execute(program: Program, visual_input: VisualInput, tools, budget: int = DEFAULT_BUDGET):
    """Run ``program`` on ``visual_input``; returns ``(result or None, trace)``."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    m = _Machine(tools, budget)
    m.env[program.param] = visual_input.root_patch()
    outcome: Returned | Failed
    result = None
    try:
        m.run_block(program.ast)
        outcome = Failed("internal-error", "program ended without returning", m.steps)
    except _Return as r:
        try:
            result = render_value(r.value)
            outcome = Returned(result)
        except TypeError as exc:
            outcome = Failed("type-error", str(exc), m.steps)
    except _BudgetExceeded:
        outcome = Failed("step-budget", f"exceeded {budget} evaluation steps", budget)
    except ProgramError as exc:
        kind = exc.kind if exc.kind in FAILURE_KINDS else "type-error"
        outcome = Failed(kind, exc.message, m.steps)
    except ToolError as exc:
        outcome = Failed("tool-error", str(exc), m.steps)
    except KeyError as exc:
        outcome = Failed("internal-error", f"unbound variable {exc}", m.steps)
    except Exception as exc:  # noqa: BLE001 - a program must never crash the engine
        log.exception("internal error while executing program %s", program.program_hash)
        outcome = Failed("internal-error", f"{type(exc).__name__}: {exc}", m.steps)
    if isinstance(outcome, Failed):
        result = None
    return result, ExecutionTrace(tuple(m.entries), outcome, min(m.steps, budget))
