import json

import pytest
from scipy import stats

from vpdistill.config import ConfigError, PipelineConfig
from vpdistill.dataset import read_header, read_jsonl
from vpdistill.filter import FilterStatus, answers_match
from vpdistill.harness import PipelineReport, build_corpus, run_pipeline, run_samples, score_answers
from vpdistill.interpreter import execute
from vpdistill.scene import QueryKind, StructuredQuery, generate_scene
from vpdistill.templates import template_catalog
from vpdistill.tools import OracleBackend, ToolRegistry
from vpdistill.values import VisualInput
from vpdistill.vpl import parse

MIXED = "Count,Exists,Spatial,DepthCompare,MultiChoice"


def corpus_for(seed, n_scenes=200, **kw):
    cfg = PipelineConfig(global_seed=seed, **kw)
    scenes = [generate_scene(seed * 1000 + i) for i in range(n_scenes)]
    return build_corpus(scenes, cfg), cfg


# -- analytic model of top-1 success
#
# The top-1 slot holds the canonical program with probability 1 - r, otherwise
# a uniformly chosen corruption. Under attribute-flip noise each verify call
# flips independently with probability p, so the chance a program answers
# correctly is a sum over flip patterns, enumerated here exactly.


class _FlipPath(OracleBackend):
    def __init__(self, scene, path):
        super().__init__([scene])
        self.path = path
        self.calls = 0

    def verify_property(self, patch, category, prop, call_index):
        truth = super().verify_property(patch, category, prop, call_index)
        i = self.calls
        self.calls += 1
        return truth != (i < len(self.path) and self.path[i])


def p_program_correct(src, scene, gold, p_flip):
    prog, vi = parse(src), VisualInput.from_scene(scene)
    total, stack = 0.0, [()]
    while stack:
        path = stack.pop()
        backend = _FlipPath(scene, path)
        result, trace = execute(prog, vi, ToolRegistry(backend))
        prob = (1 - p_flip) ** (backend.calls - len(path))
        for flipped in path:
            prob *= p_flip if flipped else 1 - p_flip
        if trace.ok and answers_match(result, gold):
            total += prob
        # branch on the first flip after the fixed prefix
        for j in range(len(path), backend.calls):
            stack.append(path + (False,) * (j - len(path)) + (True,))
    return total


def expected_success_at_1(corpus, r, p_flip):
    acc = 0.0
    for s in corpus.samples:
        scene = corpus.scenes[s.scene_id]
        q = {v: p_program_correct(src, scene, s.gold_answer, p_flip) for v, src in template_catalog(s.query).items()}
        wrong = [x for v, x in q.items() if v != "canonical"]
        acc += (1 - r) * q["canonical"] + r * sum(wrong) / len(wrong)
    return acc / len(corpus.samples)


def test_flip_enumeration_sums_to_one(bus_scene):
    src = template_catalog(StructuredQuery(QueryKind.COUNT, category="bus", attributes=("yellow",)))["canonical"]
    # every possible answer 0..3 together covers all flip patterns
    total = sum(p_program_correct(src, bus_scene, str(a), 0.1) for a in range(4))
    assert total == pytest.approx(1.0)
    # correct only if none of the three verify calls flips
    assert p_program_correct(src, bus_scene, "1", 0.1) == pytest.approx(0.9**3 + 2 * 0.1**2 * 0.9)


def test_noise_free_success_at_k_is_one():
    corpus, cfg = corpus_for(0, n_samples=500, kinds=MIXED)
    results = run_samples(corpus, cfg)
    assert len(results) == 500
    assert sum(r.success_at_k for r in results) == 500
    assert all(r.status is FilterStatus.SELECTED_PROGRAM for r in results)


def test_top_k_direction_and_analytic_rate():
    r, p = 0.5, 0.1
    corpus, cfg = corpus_for(1, n_samples=300, kinds=MIXED, corruption_rate=r, p_attr_flip=p)
    results = run_samples(corpus, cfg)
    s1 = sum(x.success_at_1 for x in results)
    sk = sum(x.success_at_k for x in results)
    assert sk > s1
    assert all(x.success_at_k for x in results if x.success_at_1)
    lo, hi = stats.binom.interval(0.99, 300, expected_success_at_1(corpus, r, p))
    assert lo <= s1 <= hi


def test_k1_matches_top_of_k5():
    corpus, cfg = corpus_for(2, n_samples=150, kinds=MIXED, corruption_rate=0.5)
    five = run_samples(corpus, cfg)
    one = run_samples(corpus, cfg.merged(k=1))
    assert [a.success_at_1 for a in five] == [b.success_at_k for b in one]


def test_reconciliation_and_files(tmp_path):
    out = tmp_path / "d.jsonl"
    corpus, cfg = corpus_for(3, n_scenes=40, n_samples=120, corruption_rate=0.9, p_attr_flip=0.3,
                             p_miss=0.2, unlabeled_fraction=0.2, output_path=str(out))
    path, report = run_pipeline(corpus, cfg)
    records = read_jsonl(path)
    ov = report.overall
    assert report.n_samples == len(corpus.samples) == 120
    assert 0 < ov.n_labeled < 120
    n_rat = sum(r.objective == "rationale" for r in records)
    assert n_rat == ov.n_selected + ov.n_unlabeled_top == ov.n_rationale_records
    assert ov.n_label_records == sum(r.objective == "label" for r in records)
    assert ov.n_label_only > 0
    assert sum(s.n_samples for s in report.per_task.values()) == 120
    assert 0.0 <= ov.success_at_1 <= ov.success_at_k <= 1.0
    for st in report.per_task.values():
        assert st.success_at_1 <= st.success_at_k
    saved = PipelineReport.from_dict(json.loads((tmp_path / "d.report.json").read_text()))
    assert saved.overall == ov
    assert read_header(path)["global_seed"] == 3


@pytest.mark.parametrize("workers", [4])
def test_worker_count_does_not_change_outputs(tmp_path, workers):
    files = []
    for w in (1, workers):
        d = tmp_path / f"w{w}"
        corpus, cfg = corpus_for(4, n_scenes=30, n_samples=80, corruption_rate=0.5, p_attr_flip=0.2,
                                 p_miss=0.1, output_path=str(d / "d.jsonl"), workers=w)
        run_pipeline(corpus, cfg)
        files.append(((d / "d.jsonl").read_bytes(), (d / "d.report.json").read_bytes()))
    assert files[0] == files[1]


def test_per_sample_error_does_not_abort():
    corpus, cfg = corpus_for(5, n_scenes=10, n_samples=20)

    class Exploding:
        def call(self, name, receiver, args, call_index):
            raise RuntimeError("backend crashed")

    results = run_samples(corpus, cfg, tools=Exploding())
    # tool failures inside programs are outcomes, so nothing is selected
    assert all(r.status is FilterStatus.LABEL_ONLY for r in results)
    assert all(len(r.records) == 1 for r in results)


def test_config_validation():
    with pytest.raises(ConfigError):
        PipelineConfig(mode="llm").validate()
    with pytest.raises(ConfigError):
        PipelineConfig(offline=True, use_judge=True, llm_base_url="http://x", llm_model="m").validate()
    with pytest.raises(ConfigError):
        PipelineConfig(k=6).validate()
    with pytest.raises(ConfigError):
        PipelineConfig().merged(bogus=1)


# -- scoring


def test_em_all_equal():
    assert score_answers(["2", "yes", "dog"], ["2", "yes", "dog"]) == 1.0
    assert score_answers(["Two", "no"], ["2", "yes"], "EM") == 0.5


def test_vqa_score_boundaries():
    refs3 = ["dog"] * 3 + ["cat"] * 7
    refs1 = ["dog"] + ["cat"] * 9
    assert score_answers(["dog"], [refs3], "VQAScore") == 1.0
    assert score_answers(["dog"], [refs1], "VQAScore") == pytest.approx(1 / 3)
    assert score_answers(["dog", "dog"], [refs3, refs1], "VQAScore") == pytest.approx(2 / 3)


def test_score_errors():
    with pytest.raises(ValueError):
        score_answers(["a"], ["a", "b"])
    with pytest.raises(ValueError):
        score_answers(["a"], [[]], "VQAScore")
    with pytest.raises(ValueError):
        score_answers(["a"], ["a"], "BLEU")
