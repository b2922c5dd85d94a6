"""Command-line interface.

Subcommands: ``gen-scenes``, ``synth``, ``exec``, ``score`` and ``report``.
Exit codes are listed in ``EXIT_CODES`` and in docs/cli.md.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, net

EXIT_OK = 0
EXIT_PROGRAM_FAILED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_DATA = 5
EXIT_NETWORK = 6

EXIT_CODES = {
    EXIT_OK: "success",
    EXIT_PROGRAM_FAILED: "exec: the program failed to parse or to run",
    EXIT_USAGE: "unknown flag or bad argument",
    EXIT_CONFIG: "invalid or inconsistent configuration",
    EXIT_MISSING: "input file or asset not found",
    EXIT_DATA: "malformed input data",
    EXIT_NETWORK: "network failure or network use while offline",
}

log = logging.getLogger("vpdistill")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--offline", action="store_true", default=None, help="forbid all network clients")
    p.add_argument("--config", metavar="FILE", help="INI config file ([vpdistill] section); flags win")
    p.add_argument("--workers", type=int, metavar="N", help="worker threads (does not change outputs)")
    p.add_argument("--seed", type=int, help="the single source of randomness")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _noise_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("oracle noise")
    for name in ("p_miss", "p_false_positive", "p_attr_flip", "p_vqa_error", "p_depth_jitter", "depth_jitter_sigma"):
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vpdistill", description="Synthesize rationale training data from visual programs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenes", help="write a synthetic scene corpus")
    _common(p)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--out", required=True)
    p.add_argument("--min-objects", type=int, default=2)
    p.add_argument("--max-objects", type=int, default=8)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--vocab", metavar="FILE", help="vocabulary asset (default: bundled)")

    p = sub.add_parser("synth", help="run the full pipeline over a scene corpus")
    _common(p)
    _noise_flags(p)
    p.add_argument("--corpus", dest="corpus_path", help="scene corpus from gen-scenes")
    p.add_argument("--out", dest="output_path")
    p.add_argument("--report", dest="report_path")
    p.add_argument("--k", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--mode", choices=("template", "llm"))
    p.add_argument("--corruption-rate", dest="corruption_rate", type=float)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--kinds", help="comma-separated query kinds, e.g. Count,Exists")
    p.add_argument("--unlabeled-fraction", dest="unlabeled_fraction", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--tool-backend", dest="tool_backend", choices=("oracle", "remote"))
    p.add_argument("--tool-base-url", dest="tool_base_url")
    p.add_argument("--llm-base-url", dest="llm_base_url")
    p.add_argument("--llm-model", dest="llm_model")
    p.add_argument("--judge", dest="use_judge", action="store_true", default=None)
    p.add_argument("--cot-mode", dest="cot_mode", choices=("template", "llm"))
    p.add_argument("--code-prompt", dest="code_prompt_path")
    p.add_argument("--verify-prompt", dest="verify_prompt_path")
    p.add_argument("--cot-prompt", dest="cot_prompt_path")

    p = sub.add_parser("exec", help="run one program on one scene and dump its trace")
    _common(p)
    _noise_flags(p)
    p.add_argument("program_file")
    p.add_argument("--scene", required=True, help="scene id, e.g. s_0007")
    p.add_argument("--scenes", metavar="FILE", help="scene corpus (default: regenerate the scene from its id)")
    p.add_argument("--query", default="", help="question text used for the rationale")
    p.add_argument("--budget", type=int)

    p = sub.add_parser("score", help="score predictions against gold answers")
    _common(p)
    p.add_argument("pred_file")
    p.add_argument("gold_file")
    p.add_argument("--metric", default="EM", choices=("EM", "VQAScore"))

    p = sub.add_parser("report", help="pretty-print a pipeline report")
    _common(p)
    p.add_argument("report_file")
    return parser


# ---------------------------------------------------------------------------


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise CliError(EXIT_USAGE, f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_MISSING, f"{what} not found: {path}")
    return p


def resolve_config(args):
    from .config import ConfigError, PipelineConfig, load_config_file

    overrides = {}
    if args.config:
        _require_file(args.config, "config file")
        overrides.update(load_config_file(args.config))
    flag_map = {"seed": "global_seed"}
    names = (
        "offline", "workers", "seed", "corpus_path", "output_path", "report_path", "k", "temperature", "mode",
        "corruption_rate", "n_samples", "kinds", "unlabeled_fraction", "budget", "tool_backend", "tool_base_url",
        "llm_base_url", "llm_model", "use_judge", "cot_mode", "code_prompt_path", "verify_prompt_path",
        "cot_prompt_path", "p_miss", "p_false_positive", "p_attr_flip", "p_vqa_error", "p_depth_jitter",
        "depth_jitter_sigma",
    )
    for name in names:
        v = getattr(args, name, None)
        if v is not None:
            overrides[flag_map.get(name, name)] = v
    try:
        return PipelineConfig().merged(**overrides).validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_gen_scenes(args) -> int:
    from .scene import SceneGenConfig, generate_scene, dump_scenes, load_vocabulary

    vocab = load_vocabulary(_require_file(args.vocab, "vocabulary")) if args.vocab else None
    kw = dict(min_objects=args.min_objects, max_objects=args.max_objects, width=args.width, height=args.height)
    cfg = SceneGenConfig(**kw, vocab=vocab) if vocab else SceneGenConfig(**kw)
    cfg.validate()
    seed = args.seed or 0
    if args.n < 0:
        raise CliError(EXIT_USAGE, "--n must be non-negative")
    # scene i is generated from seed + i, so its id encodes its own seed
    scenes = [generate_scene(seed + i, cfg) for i in range(args.n)]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    dump_scenes(scenes, args.out, header={"seed": seed, "n": args.n, "scene_config": cfg.to_dict()})
    print(f"wrote {len(scenes)} scenes to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .harness import build_corpus, run_pipeline
    from .scene import load_scenes

    config = resolve_config(args)
    if config.offline:
        net.set_offline(True)
    scenes = load_scenes(_require_file(config.corpus_path, "--corpus"))
    corpus = build_corpus(scenes, config)
    out, report = run_pipeline(corpus, config)
    print(report.format())
    print(f"records: {out}\nreport: {config.resolved_report_path}")
    return EXIT_OK


def cmd_exec(args) -> int:
    from .config import PipelineConfig
    from .cot import RationaleError, render_rationale_template
    from .interpreter import execute
    from .scene import generate_scene, load_scenes, seed_from_scene_id, SceneError
    from .tools import OracleBackend, ToolRegistry
    from .values import VisualInput
    from .vpl import ParseError, parse

    if args.offline:
        net.set_offline(True)
    config = resolve_config(args)
    src = _require_file(args.program_file, "program file").read_text("utf-8")
    if args.scenes:
        scenes = {s.scene_id: s for s in load_scenes(_require_file(args.scenes, "--scenes"))}
        if args.scene not in scenes:
            raise CliError(EXIT_DATA, f"scene {args.scene} not in {args.scenes}")
        scene = scenes[args.scene]
    else:
        try:
            scene = generate_scene(seed_from_scene_id(args.scene))
        except SceneError as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None
    try:
        program = parse(src)
    except ParseError as exc:
        print(f"parse error ({exc.kind}): {exc}", file=sys.stderr)
        return EXIT_PROGRAM_FAILED
    tools = ToolRegistry(OracleBackend([scene], config.noise))
    result, trace = execute(program, VisualInput.from_scene(scene), tools, config.budget)
    print(f"result: {result if result is not None else '<failed>'}")
    print(f"trace ({len(trace.entries)} tool calls):")
    sys.stdout.write(trace.dump_lines())
    if result is None:
        return EXIT_PROGRAM_FAILED
    try:
        rationale = render_rationale_template(trace, args.query, result)
        print(f"rationale: {rationale.text}")
    except RationaleError as exc:  # pragma: no cover - result came from this trace
        print(f"rationale unavailable: {exc}", file=sys.stderr)
    return EXIT_OK


def _read_answers(path: Path) -> list:
    """JSONL with ``answer`` or ``answers`` per line, or plain text one per line."""
    out = []
    for i, line in enumerate(path.read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            out.append(line.strip())
            continue
        if isinstance(obj, dict):
            if "__header__" in obj:
                continue
            if "answers" in obj:
                out.append([str(a) for a in obj["answers"]])
            elif "answer" in obj:
                out.append(str(obj["answer"]))
            elif "target" in obj:
                out.append(str(obj["target"]))
            else:
                raise CliError(EXIT_DATA, f"{path}:{i}: no answer field")
        elif isinstance(obj, str):
            out.append(obj)
        else:
            out.append(str(obj))
    return out


def cmd_score(args) -> int:
    from .harness import score_answers

    preds = _read_answers(_require_file(args.pred_file, "prediction file"))
    golds = _read_answers(_require_file(args.gold_file, "gold file"))
    preds = [p if isinstance(p, str) else (p[0] if p else "") for p in preds]
    try:
        score = score_answers(preds, golds, args.metric)
    except ValueError as exc:
        raise CliError(EXIT_DATA, str(exc)) from None
    print(f"{args.metric}: {score:.4f} over {len(preds)} items")
    return EXIT_OK


def cmd_report(args) -> int:
    from .harness import PipelineReport

    path = _require_file(args.report_file, "report file")
    try:
        report = PipelineReport.from_dict(json.loads(path.read_text("utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(EXIT_DATA, f"{path}: not a pipeline report ({exc})") from None
    print(report.format())
    return EXIT_OK


COMMANDS = {
    "gen-scenes": cmd_gen_scenes,
    "synth": cmd_synth,
    "exec": cmd_exec,
    "score": cmd_score,
    "report": cmd_report,
}


def main(argv=None) -> int:
    from .config import ConfigError
    from .dataset import DatasetError
    from .llm import LlmError
    from .prompts import PromptError
    from .scene import SceneError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    was_offline = net.is_offline()
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except ConfigError as exc:
        code, msg = EXIT_CONFIG, f"config error: {exc}"
    except (PromptError, FileNotFoundError) as exc:
        code, msg = EXIT_MISSING, str(exc)
    except (SceneError, DatasetError) as exc:
        code, msg = EXIT_DATA, str(exc)
    except (net.OfflineError, LlmError) as exc:
        code, msg = EXIT_NETWORK, str(exc)
    finally:
        net.set_offline(was_offline)
    print(f"vpdistill: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
