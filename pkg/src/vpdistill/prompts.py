"""Prompt template assets with ``{slot}`` placeholders.

Slots are replaced literally, so templates may contain other braces (code,
JSON) without escaping.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

CODE_GENERATION = "code_generation.txt"
ANSWER_VERIFICATION = "answer_verification.txt"
COT_CONVERSION = "cot_conversion.txt"

SLOTS = {
    CODE_GENERATION: ("tool_api_description", "caption", "query"),
    ANSWER_VERIFICATION: ("query", "gold", "prediction"),
    COT_CONVERSION: ("query", "program", "execution_trace", "output"),
}


class PromptError(ValueError):
    pass


def load_prompt(name: str, path: str | Path | None = None) -> str:
    """Read a bundled prompt, or the file at ``path`` when given."""
    if path is not None:
        try:
            text = Path(path).read_text("utf-8")
        except OSError as exc:
            raise PromptError(f"cannot read prompt {path}: {exc}") from None
    else:
        text = resources.files("vpdistill").joinpath("assets/prompts", name).read_text("utf-8")
    missing = [s for s in SLOTS.get(name, ()) if "{" + s + "}" not in text]
    if missing:
        raise PromptError(f"prompt {path or name} lacks slots {missing}")
    return text


def fill(template: str, **slots: str) -> str:
    # single pass, so slot values containing "{x}" are never re-expanded
    def sub(m):
        key = m.group(1)
        return slots[key] if key in slots else m.group(0)

    return re.sub(r"\{(\w+)\}", sub, template)
