"""
Build a small training set
==========================

Generate scenes, run the whole pipeline and look at what lands in the JSONL
file: a short-answer record for every labeled question and a rationale record
whenever a program was kept.
"""

import tempfile
from collections import Counter
from pathlib import Path

from vpdistill.config import PipelineConfig
from vpdistill.dataset import read_jsonl
from vpdistill.harness import build_corpus, run_pipeline
from vpdistill.scene import generate_scene

out_dir = Path(tempfile.mkdtemp())
cfg = PipelineConfig(
    global_seed=7,
    n_samples=60,
    corruption_rate=0.7,
    p_attr_flip=0.15,
    p_miss=0.1,
    unlabeled_fraction=0.2,
    output_path=str(out_dir / "train.jsonl"),
    workers=4,
)
corpus = build_corpus([generate_scene(100 + i) for i in range(40)], cfg)
path, report = run_pipeline(corpus, cfg)
print(report.format())

records = read_jsonl(path)
print(Counter(r.objective for r in records))

# one sample with both objectives
pair = [r for r in records if r.id.startswith(records[-1].id.split(":")[0])]
for r in pair:
    print(f"\n[{r.objective}] {r.instruction}\nQ: {r.query}\nA: {r.target}")
