"""Resolved pipeline configuration.

Values come from defaults, then an optional INI-style config file (section
``[vpdistill]``), then command-line flags; later sources win.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .interpreter import DEFAULT_BUDGET
from .progen import MAX_TEMPLATE_K, MODES
from .scene import ALL_KINDS, QueryKind
from .tools import NoiseConfig

CONFIG_SECTION = "vpdistill"
BACKENDS = ("oracle", "remote")
COT_MODES = ("template", "llm")
# knobs that change where or how fast a run happens, never its content
RUN_ONLY = ("workers", "output_path", "report_path", "corpus_path")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    global_seed: int = 0
    k: int = 5
    temperature: float = 0.5
    mode: str = "template"
    corruption_rate: float = 0.5
    # oracle noise
    p_miss: float = 0.0
    p_false_positive: float = 0.0
    p_attr_flip: float = 0.0
    p_vqa_error: float = 0.0
    p_depth_jitter: float = 0.0
    depth_jitter_sigma: float = 0.05
    offline: bool = False
    # corpus
    corpus_path: str | None = None
    n_samples: int | None = None
    kinds: str | None = None  # comma-separated query kinds; None = all
    unlabeled_fraction: float = 0.0
    # outputs
    output_path: str = "data.jsonl"
    report_path: str | None = None
    # prompts (None = bundled asset)
    code_prompt_path: str | None = None
    verify_prompt_path: str | None = None
    cot_prompt_path: str | None = None
    # execution
    budget: int = DEFAULT_BUDGET
    workers: int = 1
    tool_backend: str = "oracle"
    tool_base_url: str | None = None
    tool_timeout_ms: int = 30_000
    # LLM endpoint
    llm_base_url: str | None = None
    llm_model: str | None = None
    llm_api_key_env: str = "VPD_LLM_API_KEY"
    llm_timeout_ms: int = 60_000
    use_judge: bool = False
    cot_mode: str = "template"

    @property
    def noise(self) -> NoiseConfig:
        return NoiseConfig(
            seed=self.global_seed,
            p_miss=self.p_miss,
            p_false_positive=self.p_false_positive,
            p_attr_flip=self.p_attr_flip,
            p_vqa_error=self.p_vqa_error,
            p_depth_jitter=self.p_depth_jitter,
            depth_jitter_sigma=self.depth_jitter_sigma,
        )

    @property
    def query_kinds(self) -> tuple:
        if not self.kinds:
            return ALL_KINDS
        return tuple(QueryKind(k.strip()) for k in self.kinds.split(",") if k.strip())

    @property
    def resolved_report_path(self) -> str:
        if self.report_path:
            return self.report_path
        p = Path(self.output_path)
        return str(p.with_name(p.stem + ".report.json"))

    @property
    def needs_llm(self) -> bool:
        return self.mode == "llm" or self.use_judge or self.cot_mode == "llm"

    def validate(self) -> "PipelineConfig":
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.mode == "template" and self.k > MAX_TEMPLATE_K:
            raise ConfigError(f"template mode supports k <= {MAX_TEMPLATE_K}")
        if self.cot_mode not in COT_MODES:
            raise ConfigError(f"cot_mode must be one of {COT_MODES}")
        if self.tool_backend not in BACKENDS:
            raise ConfigError(f"tool_backend must be one of {BACKENDS}")
        for name in ("corruption_rate", "unlabeled_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        try:
            self.noise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.budget <= 0 or self.workers < 1:
            raise ConfigError("budget and workers must be positive")
        if self.n_samples is not None and self.n_samples < 0:
            raise ConfigError("n_samples must be non-negative")
        if self.kinds:
            try:
                self.query_kinds
            except ValueError as exc:
                raise ConfigError(f"kinds: {exc}") from None
        if self.offline:
            if self.mode != "template":
                raise ConfigError("offline runs need template mode (no LLM program generation)")
            if self.use_judge or self.cot_mode != "template":
                raise ConfigError("offline runs cannot use the LLM judge or LLM rationales")
            if self.tool_backend != "oracle":
                raise ConfigError("offline runs need the oracle tool backend")
        if self.needs_llm and not (self.llm_base_url and self.llm_model):
            raise ConfigError("LLM features need llm_base_url and llm_model")
        if self.tool_backend == "remote" and not self.tool_base_url:
            raise ConfigError("the remote tool backend needs tool_base_url")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def echo(self) -> dict:
        """Settings that determine the output; worker count and paths do not."""
        return {k: v for k, v in asdict(self).items() if k not in RUN_ONLY}

    def merged(self, **overrides) -> "PipelineConfig":
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def _coerce(name: str, raw: str):
    f = {f.name: f for f in fields(PipelineConfig)}[name]
    t = str(f.type)
    try:
        if "bool" in t:
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in t:
            return int(raw)
        if "float" in t:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def load_config_file(path: str | Path) -> dict:
    """Read overrides from an INI file; unknown keys are an error."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not parser.has_section(CONFIG_SECTION):
        raise ConfigError(f"{path}: missing [{CONFIG_SECTION}] section")
    known = {f.name for f in fields(PipelineConfig)}
    out = {}
    for key, raw in parser.items(CONFIG_SECTION):
        if key not in known:
            raise ConfigError(f"{path}: unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out
