"""Program templates for offline candidate generation.

For each query kind there is one canonical program, which returns the oracle
answer when the tools are noise-free, and four corrupted variants imitating
common mistakes of code-writing LLMs: a dropped or wrong filter, a wrong
relation or direction, a spurious extra step, and an off-by-one or negated
aggregation. Variants may still answer correctly on some scenes, as a buggy
program often does.
"""

from __future__ import annotations

import json

from .scene import DEFAULT_VOCAB, OPTION_LETTERS, QueryKind, StructuredQuery, Vocabulary

HEADER = "def execute_command(image):\n"
N_VARIANTS = 4


def _q(s: str) -> str:
    # VPL string literals use the same escapes as JSON for our vocabulary
    return json.dumps(s)


def _body(*lines: str) -> str:
    return HEADER + "".join(f"    {line}\n" for line in lines)


def _other_category(category: str, vocab: Vocabulary) -> str:
    cats = vocab.categories
    return cats[(cats.index(category) + 1) % len(cats)] if category in cats else cats[0]


def _attr_test(var: str, cat: str, attrs) -> str:
    return " and ".join(f"{var}.verify_property({_q(cat)}, {_q(a)})" for a in attrs)


def _count(q: StructuredQuery, vocab: Vocabulary) -> dict[str, str]:
    cat, attrs = q.category, q.attributes

    def loop(filters: list[str], result: str = "str(count)", find_cat: str = cat, attrs_used=attrs) -> str:
        conds = list(filters)
        if attrs_used:
            conds.insert(0, _attr_test("patch", find_cat, attrs_used))
        if not conds:
            return _body(f"patches = image.find({_q(find_cat)})", f"return {result.replace('count', 'len(patches)')}")
        return _body(
            f"patches = image.find({_q(find_cat)})",
            "count = 0",
            "for patch in patches:",
            f"    if {' and '.join(conds)}:",
            "        count += 1",
            f"return {result}",
        )

    out = {"canonical": loop([])}
    if attrs:
        out["drop-attribute"] = loop([], attrs_used=())
    else:
        out["wrong-object"] = loop([], find_cat=_other_category(cat, vocab))
    out["wrong-relation"] = loop(["patch.center_x < image.right / 2"])
    out["spurious-step"] = loop(["patch.compute_depth() < 0.5"])
    out["off-by-one"] = loop([], result="str(count + 1)")
    return out


def _exists(q: StructuredQuery, vocab: Vocabulary) -> dict[str, str]:
    cat, attrs = q.category, q.attributes

    def prog(filters: list[str], find_cat: str = cat, attrs_used=attrs, yes="yes", no="no") -> str:
        conds = list(filters)
        if attrs_used:
            conds.insert(0, _attr_test("patch", find_cat, attrs_used))
        if not conds:
            if yes == "yes":
                return _body(f"return bool_to_yesno(image.exists({_q(find_cat)}))")
            return _body(f"return bool_to_yesno(not image.exists({_q(find_cat)}))")
        return _body(
            f"for patch in image.find({_q(find_cat)}):",
            f"    if {' and '.join(conds)}:",
            f"        return {_q(yes)}",
            f"return {_q(no)}",
        )

    out = {"canonical": prog([])}
    if attrs:
        out["drop-attribute"] = prog([], attrs_used=())
    else:
        out["wrong-object"] = prog([], find_cat=_other_category(cat, vocab))
    out["wrong-relation"] = prog(["patch.center_x < image.right / 2"])
    out["spurious-step"] = prog(["patch.compute_depth() < 0.5"])
    out["negated"] = prog([], yes="no", no="yes")
    return out


def _attribute(q: StructuredQuery, vocab: Vocabulary) -> dict[str, str]:
    cat = _q(q.category)
    return {
        "canonical": _body(f"patch = image.find({cat})[0]", 'return patch.simple_query("What color is this?")'),
        "wrong-question": _body(f"patch = image.find({cat})[0]", 'return patch.simple_query("What material is this?")'),
        "wrong-object": _body('return image.simple_query("What color is this?")'),
        "spurious-step": _body(
            "left = image.crop(image.left, image.top, image.right / 2, image.bottom)",
            f"patch = left.find({cat})[0]",
            'return patch.simple_query("What color is this?")',
        ),
        "category-answer": _body(f"patch = image.find({cat})[0]", 'return patch.simple_query("What is this?")'),
    }


_AXIS = {"left_of": ("center_x", "<"), "right_of": ("center_x", ">"), "above": ("center_y", "<"), "below": ("center_y", ">")}
_FLIP = {"<": ">", ">": "<"}


def _spatial(q: StructuredQuery, vocab: Vocabulary) -> dict[str, str]:
    axis, op = _AXIS[q.relation]
    wrong_axis = "center_y" if axis == "center_x" else "center_x"

    def prog(test: str) -> str:
        return _body(
            f"a = image.find({_q(q.category)})",
            f"b = image.find({_q(q.other)})",
            "if len(a) == 0 or len(b) == 0:",
            '    return "no"',
            f"return bool_to_yesno({test})",
        )

    return {
        "canonical": prog(f"a[0].{axis} {op} b[0].{axis}"),
        "reversed-relation": prog(f"a[0].{axis} {_FLIP[op]} b[0].{axis}"),
        "wrong-axis": prog(f"a[0].{wrong_axis} {op} b[0].{wrong_axis}"),
        "spurious-step": prog(f"a[0].compute_depth() {op} b[0].compute_depth()"),
        "negated": prog(f"not a[0].{axis} {op} b[0].{axis}"),
    }


def _depth(q: StructuredQuery, vocab: Vocabulary) -> dict[str, str]:
    a, b = _q(q.category), _q(q.other)

    def prog(test: str) -> str:
        return _body(
            f"a = image.find({a})[0]",
            f"b = image.find({b})[0]",
            f"if {test}:",
            f"    return {a}",
            f"return {b}",
        )

    return {
        "canonical": prog("a.compute_depth() < b.compute_depth()"),
        "reversed-relation": prog("a.compute_depth() > b.compute_depth()"),
        "wrong-cue": prog("a.bottom > b.bottom"),
        "size-cue": prog("(a.right - a.left) * (a.bottom - a.top) > (b.right - b.left) * (b.bottom - b.top)"),
        "no-comparison": _body(f"a = image.find({a})[0]", f"return {a}"),
    }


def _multi_choice(q: StructuredQuery, vocab: Vocabulary) -> dict[str, str]:
    opts = list(zip(OPTION_LETTERS, q.options))

    def chain(order, test, answer_shift=0, fallback=None) -> str:
        lines = []
        for letter, option in order:
            shown = OPTION_LETTERS[(OPTION_LETTERS.index(letter) + answer_shift) % len(opts)]
            lines += [f"if {test(option)}:", f"    return {_q(shown)}"]
        lines.append(f"return {_q(fallback)}")
        return _body(*lines)

    def exists(o):
        return f"image.exists({_q(o)})"

    last = opts[-1][0]
    return {
        "canonical": chain(opts[:-1], exists, fallback=last),
        "negated": chain(opts[:-1], lambda o: f"not image.exists({_q(o)})", fallback=last),
        "threshold": chain(opts[:-1], lambda o: f"len(image.find({_q(o)})) > 1", fallback=last),
        "off-by-one": chain(opts[:-1], exists, answer_shift=1, fallback=opts[0][0]),
        "spurious-step": chain(opts[:-1], lambda o: f'image.simple_query("What is this?") == {_q(o)}', fallback=last),
    }


_BUILDERS = {
    QueryKind.COUNT: _count,
    QueryKind.EXISTS: _exists,
    QueryKind.ATTRIBUTE: _attribute,
    QueryKind.SPATIAL: _spatial,
    QueryKind.DEPTH_COMPARE: _depth,
    QueryKind.MULTI_CHOICE: _multi_choice,
}


def template_catalog(query: StructuredQuery, vocab: Vocabulary = DEFAULT_VOCAB) -> dict[str, str]:
    """Variant name to program source; ``"canonical"`` first, then 4 variants."""
    catalog = _BUILDERS[query.kind](query, vocab)
    assert len(catalog) == N_VARIANTS + 1 and next(iter(catalog)) == "canonical"
    return catalog


def canonical_program(query: StructuredQuery, vocab: Vocabulary = DEFAULT_VOCAB) -> str:
    return template_catalog(query, vocab)["canonical"]
