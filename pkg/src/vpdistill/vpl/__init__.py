"""The visual program language: a closed, Python-shaped subset.

Programs define ``execute_command(image)`` and may only use assignments,
``+=``, ``for``, ``if``/``elif``/``else``, ``return`` and calls into the
builtin tool set. ``parse`` lexes, parses and statically checks a source
string; ``pretty_print`` renders the canonical form used for hashing.
"""

from .builtins import BUILTINS, FUNCTIONS, PATCH_ATTRIBUTES, PATCH_METHODS, TRACED_TOOLS
from .errors import LexicalError, ParseError, StaticError, VPLSyntaxError
from .parser import MAX_STATEMENTS, Program, parse, try_parse
from .printer import pretty_print

__all__ = [
    "BUILTINS",
    "FUNCTIONS",
    "PATCH_ATTRIBUTES",
    "PATCH_METHODS",
    "TRACED_TOOLS",
    "LexicalError",
    "ParseError",
    "StaticError",
    "VPLSyntaxError",
    "MAX_STATEMENTS",
    "Program",
    "parse",
    "try_parse",
    "pretty_print",
]
