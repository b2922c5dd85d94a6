import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES
from vpdistill.scene import (
    ALL_KINDS,
    DEFAULT_VOCAB,
    RELATIONS,
    NoViableQuery,
    QueryKind,
    SceneError,
    SceneGenConfig,
    SceneGraph,
    SceneObject,
    StructuredQuery,
    dump_scenes,
    generate_corpus,
    generate_query,
    generate_scene,
    load_scenes,
    load_vocabulary,
    oracle_answer,
    render_query,
)


def obj(oid, cat, box, attrs=(), depth=0.5):
    return SceneObject(oid, cat, box, frozenset(attrs), depth)


def check_invariants(scene: SceneGraph):
    ids = [o.object_id for o in scene.objects]
    assert len(ids) == len(set(ids))
    attrs = set(DEFAULT_VOCAB.attributes)
    for o in scene.objects:
        x1, y1, x2, y2 = o.box
        assert 0 <= x1 < x2 <= scene.width and 0 <= y1 < y2 <= scene.height
        assert 0 < o.depth <= 1
        assert o.attributes <= attrs
        assert o.category in DEFAULT_VOCAB.categories
    for r in scene.relations:
        assert r.subject in ids and r.object in ids and r.relation in RELATIONS


def test_default_scene_in_range():
    cfg = SceneGenConfig()
    s = generate_scene(0, cfg)
    assert cfg.min_objects <= len(s.objects) <= cfg.max_objects
    check_invariants(s)


def test_generate_scene_deterministic():
    a, b = generate_scene(7), generate_scene(7)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_seed7_three_objects_golden():
    s = generate_scene(7, SceneGenConfig(min_objects=3, max_objects=3))
    assert len(s.objects) == 3
    golden = json.loads((FIXTURES / "scene_seed7_three_objects.json").read_text())
    assert s.to_dict() == golden


@pytest.mark.parametrize(
    "cfg",
    [
        SceneGenConfig(min_objects=0, max_objects=0),
        SceneGenConfig(min_objects=5, max_objects=3),
        SceneGenConfig(width=5),
        SceneGenConfig(relation_density=1.5),
    ],
)
def test_bad_configs_rejected(cfg):
    with pytest.raises(SceneError):
        generate_scene(0, cfg)


def test_empty_vocabulary_rejected(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("[meta]\nversion\t9\n[categories]\n[colors]\n[materials]\n")
    with pytest.raises(SceneError):
        generate_scene(0, SceneGenConfig(vocab=load_vocabulary(p)))


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_generated_scenes_satisfy_invariants(seed):
    check_invariants(generate_scene(seed))


def test_scene_rejects_bad_relation_and_duplicates():
    a = obj("a", "dog", (0, 0, 10, 10))
    with pytest.raises(SceneError):
        SceneGraph("s", 100, 100, (a, a), ())
    with pytest.raises(SceneError):
        SceneGraph("s", 100, 100, (obj("a", "dog", (0, 0, 200, 10)),), ())
    with pytest.raises(SceneError):
        obj("a", "dog", (5, 0, 5, 10))
    with pytest.raises(SceneError):
        obj("a", "dog", (0, 0, 5, 10), depth=0.0)


def test_count_yellow_bus_brute_force():
    s = SceneGraph("s_1", 640, 480, (
        obj("o0", "bus", (0, 0, 100, 100), {"yellow"}),
        obj("o1", "bus", (200, 0, 300, 100), {"red"}),
        obj("o2", "dog", (400, 0, 500, 100), {"yellow"}),
    ), ())
    q = StructuredQuery(QueryKind.COUNT, category="bus", attributes=("yellow",))
    # independent oracle: list comprehension over the objects
    expected = sum(1 for o in s.objects if o.category == "bus" and "yellow" in o.attributes)
    assert oracle_answer(s, q) == str(expected) == "1"
    assert render_query(q) == "How many yellow buses are in the picture?"


def test_exists_absent_is_no():
    s = SceneGraph("s_1", 640, 480, (obj("o0", "bus", (0, 0, 100, 100), {"red"}),), ())
    assert oracle_answer(s, StructuredQuery(QueryKind.EXISTS, category="dog")) == "no"


def test_depth_compare_and_spatial():
    s = SceneGraph("s_1", 640, 480, (
        obj("a", "knife", (10, 10, 60, 60), depth=0.2),
        obj("b", "plate", (300, 10, 400, 60), depth=0.9),
    ), ())
    assert oracle_answer(s, StructuredQuery(QueryKind.DEPTH_COMPARE, category="knife", other="plate")) == "knife"
    assert oracle_answer(s, StructuredQuery(QueryKind.SPATIAL, category="knife", relation="left_of", other="plate")) == "yes"
    assert oracle_answer(s, StructuredQuery(QueryKind.SPATIAL, category="knife", relation="right_of", other="plate")) == "no"


def test_spatial_dead_zone_is_ambiguous():
    s = SceneGraph("s_1", 1000, 480, (
        obj("a", "knife", (100, 10, 200, 60)),
        obj("b", "plate", (110, 100, 200, 160)),
    ), ())
    q = StructuredQuery(QueryKind.SPATIAL, category="knife", relation="left_of", other="plate")
    assert oracle_answer(s, q) == "ambiguous"


def test_multichoice_letter():
    s = SceneGraph("s_1", 640, 480, (obj("o0", "piano", (0, 0, 100, 100)),), ())
    q = StructuredQuery(QueryKind.MULTI_CHOICE, options=("dog", "piano", "cat"))
    assert oracle_answer(s, q) == "B"
    assert render_query(q) == "Which of these objects is in the picture? (A) dog (B) piano (C) cat"


def test_spatial_needs_two_objects():
    s = SceneGraph("s_1", 640, 480, (obj("o0", "bus", (0, 0, 100, 100)),), ())
    with pytest.raises(NoViableQuery):
        generate_query(s, 0, QueryKind.SPATIAL)


def test_query_validation():
    with pytest.raises(SceneError):
        StructuredQuery(QueryKind.MULTI_CHOICE, options=("dog",))
    with pytest.raises(SceneError):
        StructuredQuery(QueryKind.SPATIAL, category="dog", relation="on", other="cat")
    with pytest.raises(SceneError):
        StructuredQuery(QueryKind.COUNT)


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=99), st.sampled_from(ALL_KINDS))
def test_gold_answer_consistency(scene_seed, qseed, kind):
    scene = generate_scene(scene_seed)
    try:
        sample = generate_query(scene, qseed, kind)
    except NoViableQuery:
        return
    assert sample.gold_answer == oracle_answer(scene, sample.query)
    assert sample.gold_answer and sample.gold_answer not in ("ambiguous", "none")
    if kind is QueryKind.MULTI_CHOICE:
        present = {o.category for o in scene.objects}
        assert sum(o in present for o in sample.query.options) == 1


def test_corpus_roundtrip(tmp_path):
    scenes = [generate_scene(i) for i in range(20)]
    p = tmp_path / "scenes.jsonl"
    dump_scenes(scenes, p, header={"seed": 0})
    assert load_scenes(p) == scenes
    samples = generate_corpus(scenes, 3, n=30)
    assert [s.sample_id for s in samples] == [f"q_{i:05d}" for i in range(30)]
    assert generate_corpus(scenes, 3, n=30) == samples


def test_bad_scene_line_reports_position(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"scene_id": "s"}\n')
    with pytest.raises(SceneError, match="1"):
        load_scenes(p)
