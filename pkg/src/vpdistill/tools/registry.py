"""Uniform dispatch from builtin names to tool implementations."""

from __future__ import annotations

import logging
import math

from ..values import PatchHandle, ProgramError, render_value, type_name
from ..vpl.builtins import BUILTINS, FUNCTIONS, PATCH_METHODS, TRACED_TOOLS

log = logging.getLogger(__name__)


class ToolError(Exception):
    """A tool backend failed (timeout, HTTP error, malformed response)."""

    def __init__(self, kind: str, message: str):
        self.kind = kind
        self.message = message
        super().__init__(f"{kind}: {message}")


def _expect(value, types, what: str):
    if isinstance(value, bool) and bool not in types:
        raise ProgramError("type-error", f"{what} must be {'/'.join(t.__name__ for t in types)}, got bool")
    if not isinstance(value, types):
        names = "/".join(t.__name__ for t in types)
        raise ProgramError("type-error", f"{what} must be {names}, got {type_name(value)}")
    return value


# Pure helpers


def _len(receiver, args, call_index):
    (v,) = args
    if isinstance(v, (list, str)):
        return len(v)
    raise ProgramError("type-error", f"len() of {type_name(v)}")


def _str(receiver, args, call_index):
    return render_value(args[0])


def _int(receiver, args, call_index):
    (v,) = args
    if isinstance(v, bool):
        raise ProgramError("type-error", "int() of bool")
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ProgramError("value-error", f"int() of {v}")
        return int(v)
    if isinstance(v, str):
        try:
            return int(v.strip())
        except ValueError:
            raise ProgramError("value-error", f"int() of {v!r}") from None
    raise ProgramError("type-error", f"int() of {type_name(v)}")


def _bool_to_yesno(receiver, args, call_index):
    return "yes" if _expect(args[0], (bool,), "bool_to_yesno() argument") else "no"


def _distance(receiver, args, call_index):
    a = _expect(args[0], (PatchHandle,), "distance() argument")
    b = _expect(args[1], (PatchHandle,), "distance() argument")
    return math.hypot(a.center_x - b.center_x, a.center_y - b.center_y)


def _crop(receiver, args, call_index):
    coords = [_expect(a, (int, float), "crop() coordinate") for a in args]
    try:
        return receiver.child(f"{receiver.patch_id}/crop{call_index}", coords)
    except ValueError as exc:
        raise ProgramError("value-error", str(exc)) from None


_HELPERS = {
    "len": _len,
    "str": _str,
    "int": _int,
    "bool_to_yesno": _bool_to_yesno,
    "distance": _distance,
    "crop": _crop,
}


class ToolRegistry:
    """Binds every builtin to an implementation.

    Vision and knowledge tools delegate to ``backend`` (an oracle or remote
    backend) and are retried once on :class:`ToolError`; ``crop``, ``len``,
    ``str``, ``int``, ``bool_to_yesno`` and ``distance`` are pure helpers.
    The registry holds no per-call state and is safe to share across threads.
    """

    def __init__(self, backend, *, retries: int = 1):
        self.backend = backend
        self.retries = retries
        self.bindings = dict(_HELPERS)
        for name in TRACED_TOOLS:
            impl = getattr(backend, name, None)
            if impl is None:
                raise ValueError(f"backend {type(backend).__name__} does not implement {name!r}")
            self.bindings[name] = self._bind(name, impl)
        missing = BUILTINS - set(self.bindings)
        if missing:
            raise ValueError(f"unbound builtins: {sorted(missing)}")

    @staticmethod
    def is_traced(name: str) -> bool:
        return name in TRACED_TOOLS

    def call(self, name: str, receiver: PatchHandle | None, args: tuple, call_index: int):
        try:
            fn = self.bindings[name]
        except KeyError:
            raise ProgramError("unbound-builtin", name) from None
        if name in PATCH_METHODS and not isinstance(receiver, PatchHandle):
            raise ProgramError("type-error", f".{name}() needs a patch receiver, got {type_name(receiver)}")
        want = PATCH_METHODS.get(name, FUNCTIONS.get(name))
        if want is not None and len(args) != want:
            raise ProgramError("type-error", f"{name}() takes {want} argument(s)")
        return fn(receiver, args, call_index)

    def _bind(self, name, impl):
        def str_arg(v, what):
            return _expect(v, (str,), f"{name}() {what}")

        if name == "find" or name == "exists":
            def run(receiver, args, call_index):
                return impl(receiver, str_arg(args[0], "category"), call_index)
        elif name == "verify_property":
            def run(receiver, args, call_index):
                return impl(receiver, str_arg(args[0], "category"), str_arg(args[1], "property"), call_index)
        elif name == "simple_query":
            def run(receiver, args, call_index):
                return impl(receiver, str_arg(args[0], "question"), call_index)
        elif name == "compute_depth":
            def run(receiver, args, call_index):
                return impl(receiver, call_index)
        elif name == "llm_query":
            def run(receiver, args, call_index):
                return impl(str_arg(args[0], "question"), call_index)
        else:  # pragma: no cover
            raise ValueError(name)

        def with_retry(receiver, args, call_index):
            attempt = 0
            while True:
                try:
                    return run(receiver, args, call_index)
                except ToolError as exc:
                    if attempt >= self.retries:
                        raise
                    attempt += 1
                    log.warning("tool %s failed (%s), retrying", name, exc)

        return with_retry
