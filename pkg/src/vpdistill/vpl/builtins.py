"""The closed set of names a program may use.

Patch methods and free functions map to their arity. Anything else is
rejected by the static checker.
"""

PATCH_METHODS = {
    "find": 1,
    "exists": 1,
    "verify_property": 2,
    "simple_query": 1,
    "compute_depth": 0,
    "crop": 4,
}

FUNCTIONS = {
    "llm_query": 1,
    "len": 1,
    "str": 1,
    "int": 1,
    "bool_to_yesno": 1,
    "distance": 2,
}

PATCH_ATTRIBUTES = frozenset({"left", "right", "top", "bottom", "center_x", "center_y"})

BUILTINS = frozenset(PATCH_METHODS) | frozenset(FUNCTIONS)

# Calls recorded in execution traces: the vision and knowledge tools. The rest
# are pure helpers evaluated in the interpreter.
TRACED_TOOLS = frozenset({"find", "exists", "verify_property", "simple_query", "compute_depth", "llm_query"})
