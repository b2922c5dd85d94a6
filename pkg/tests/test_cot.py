import re

import pytest
from hypothesis import given, settings, strategies as st

from conftest import COUNT_YELLOW_BUSES, FakeLlm, registry_for, visual
from vpdistill.cot import (
    RationaleError,
    format_trace,
    render_rationale_llm,
    render_rationale_template,
    validate_rationale,
)
from vpdistill.filter import normalize_answer
from vpdistill.interpreter import execute
from vpdistill.scene import ALL_KINDS, NoViableQuery, generate_query, generate_scene
from vpdistill.templates import template_catalog
from vpdistill.vpl import parse

COUNT_TENNIS = "def execute_command(image):\n    balls = image.find('tennis ball')\n    return str(len(balls))\n"
COUNT_DOGS = "def execute_command(image):\n    return str(len(image.find('dog')))\n"


def traced(src, scene):
    result, trace = execute(parse(src), visual(scene), registry_for(scene))
    assert trace.ok
    return result, trace


def test_tennis_ball_sentence(tennis_scene):
    result, trace = traced(COUNT_TENNIS, tennis_scene)
    r = render_rationale_template(trace, "How many tennis balls are in the picture?", result)
    assert r.text == "There is a tennis ball at 826 665 869 721. Thus, there is 1 tennis ball."
    assert r.final_answer == "1"
    assert r.covered_steps == (1,)


def test_box_pattern_on_grid(bus_scene):
    _, trace = traced("def execute_command(image):\n    return str(len(image.find('tennis ball')))\n", bus_scene)
    r = render_rationale_template(trace, "How many tennis balls are in the picture?", "1")
    m = re.fullmatch(r"There is a tennis ball at (\d+) (\d+) (\d+) (\d+)\. Thus, there is 1 tennis ball\.", r.text)
    assert m and all(0 <= int(v) <= 999 for v in m.groups())
    # (528,319,556,346) in 640x480 -> floor(v * 1000 / size)
    assert m.groups() == ("825", "664", "868", "720")


def test_zero_detection(bus_scene):
    scene = bus_scene
    _, trace = traced("def execute_command(image):\n    return str(len(image.find('cat')))\n", scene)
    r = render_rationale_template(trace, "How many cats are in the picture?", "0")
    assert r.text == "There are no cats in the picture. Thus, there are 0 cats."


def test_three_bus_sentence_count(bus_scene):
    result, trace = traced(COUNT_YELLOW_BUSES, bus_scene)
    r = render_rationale_template(trace, "How many yellow buses are in the picture?", result)
    sentences = [s for s in re.split(r"(?<=\.) ", r.text) if s]
    assert len(sentences) == len(trace.entries) + 1 == 5
    assert sentences[0].startswith("There are 3 buses at ")
    assert "is yellow." in sentences[1] and "is not yellow." in sentences[2]
    assert sentences[-1] == "Thus, there is 1 yellow bus."


def test_non_count_conclusion(bus_scene):
    result, trace = traced("def execute_command(image):\n    return bool_to_yesno(image.exists('dog'))\n", bus_scene)
    r = render_rationale_template(trace, "Is there a dog in the picture?", result)
    assert r.text == "There is a dog in the picture. Thus, the answer is yes."
    assert r.final_answer == "yes"


def test_failed_trace_rejected(bus_scene):
    _, trace = execute(parse("def execute_command(image):\n    return str(1 / 0)\n"), visual(bus_scene), registry_for(bus_scene))
    with pytest.raises(RationaleError):
        render_rationale_template(trace, "q", "1")
    _, trace = traced(COUNT_DOGS, bus_scene)
    with pytest.raises(RationaleError):
        render_rationale_template(trace, "How many dogs are in the picture?", "7")


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(ALL_KINDS), st.integers(0, 4))
def test_template_rationales_always_validate(seed, kind, variant_index):
    scene = generate_scene(seed)
    try:
        sample = generate_query(scene, seed, kind)
    except NoViableQuery:
        return
    src = list(template_catalog(sample.query).values())[variant_index]
    result, trace = execute(parse(src), visual(scene), registry_for(scene))
    if not trace.ok:
        return
    r = render_rationale_template(trace, sample.query_text, result)
    assert set(r.covered_steps) == {e.step for e in trace.entries}
    assert normalize_answer(r.final_answer) == normalize_answer(result)
    # the structural check and the mention-based check agree
    assert validate_rationale(r.text, trace, result) is not None
    assert render_rationale_template(trace, sample.query_text, result) == r


def test_format_trace(bus_scene):
    _, trace = traced(COUNT_YELLOW_BUSES, bus_scene)
    lines = format_trace(trace).splitlines()
    assert lines[0].startswith('1. image.find("bus") -> ')
    assert lines[1].startswith('2. [31 416 281 625].verify_property("bus", "yellow") -> True')


# -- LLM path


def llm_case(tennis_scene):
    result, trace = traced(COUNT_TENNIS, tennis_scene)
    return trace, "How many tennis balls are in the picture?", COUNT_TENNIS, result


def test_llm_valid_cot_accepted_verbatim(tennis_scene):
    text = "I look for tennis balls and find one at 826 665 869 721. Thus, there is 1 tennis ball."
    llm = FakeLlm([text])
    r = render_rationale_llm(*llm_case(tennis_scene), llm)
    assert r.text == text and r.source == "llm"
    prompt = llm.prompts[0]
    assert "find(\"tennis ball\") -> [826 665 869 721]" in prompt
    assert "How many tennis balls are in the picture?" in prompt


def test_llm_missing_answer_falls_back(tennis_scene):
    r = render_rationale_llm(*llm_case(tennis_scene), FakeLlm(["There is a tennis ball at 826 665 869 721."]))
    assert r.source == "template"
    assert r.text.endswith("Thus, there is 1 tennis ball.")


def test_llm_missing_box_falls_back(tennis_scene):
    r = render_rationale_llm(*llm_case(tennis_scene), FakeLlm(["There is a ball. Thus, there is 1 tennis ball."]))
    assert r.source == "template"


def test_llm_number_word_accepted(tennis_scene):
    text = "A tennis ball sits at 826 665 869 721. Thus, the count is one."
    r = render_rationale_llm(*llm_case(tennis_scene), FakeLlm([text]))
    assert r.source == "llm"
    assert normalize_answer(r.final_answer) == "1"


def test_llm_transport_failure_falls_back(tennis_scene):
    r = render_rationale_llm(*llm_case(tennis_scene), FakeLlm([], fail=True))
    assert r.source == "template"
