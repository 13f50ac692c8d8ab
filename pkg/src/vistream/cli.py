"""Command line entry point.

Subcommands: gen-traces (build a deterministic trace set), simulate
(run sessions against a scripted or remote backend), eval (score
transcripts into a report), aggregate (recompute summary columns for a
per-subtask CSV of published results), and report (re-render a saved
report). Shared knobs may come from a JSON config file; explicit flags
win over the file, which wins over built-in defaults. Usage errors exit
with 2, runtime failures with 1 and a one-line diagnostic.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

from . import data as dio
from .context import FusionConfig, FusionMode
from .engine import EngineConfig, run_session
from .errors import RejectedInput, VistreamError
from .evaluator import (
    aggregate_rows,
    emit_report,
    evaluate,
    load_report,
    render_aggregate,
    save_report,
)
from .gating import GatingConfig, ScorePosition
from .judges import JUDGE_ENV_VAR, make_judge
from .protocol import (
    DEFAULT_TIMEOUT,
    Backend,
    NoiseConfig,
    RemoteBackend,
    ScriptedBackend,
    parse_address,
)


@dataclass
class RunConfig:
    """Shared run parameters; also echoed into reports for provenance."""

    theta: float = 0.35
    margin: float = 2.0
    fusion: str = "adaptive"
    score_position: str = "last_visual_token"
    dim: int = 16
    token_cap: int = 256
    seed: int = 0
    judge: str = "mock"
    jobs: int = 1
    timeout: float = DEFAULT_TIMEOUT


_CONFIG_KEYS = set(asdict(RunConfig()))


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    values = asdict(RunConfig())
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise RejectedInput(f"cannot read config file {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise RejectedInput(f"config file {config_path} must hold a JSON object")
        unknown = set(loaded) - _CONFIG_KEYS
        if unknown:
            raise RejectedInput(f"config file has unknown keys: {', '.join(sorted(unknown))}")
        values.update(loaded)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    cfg = RunConfig(**values)
    # fail fast on bad enum values
    FusionMode(cfg.fusion)
    ScorePosition(cfg.score_position)
    GatingConfig(threshold=cfg.theta, score_position=ScorePosition(cfg.score_position))
    if cfg.margin < 0:
        raise RejectedInput(f"margin must be >= 0, got {cfg.margin}")
    if cfg.jobs < 1:
        raise RejectedInput(f"jobs must be >= 1, got {cfg.jobs}")
    return cfg


def _engine_config(cfg: RunConfig) -> EngineConfig:
    return EngineConfig(
        gating=GatingConfig(threshold=cfg.theta, score_position=ScorePosition(cfg.score_position)),
        fusion=FusionConfig.default(FusionMode(cfg.fusion), cfg.dim, seed=cfg.seed),
        dim=cfg.dim,
        token_cap=cfg.token_cap,
    )


def _provenance(cfg: RunConfig) -> dict:
    resolved = dict(sorted(asdict(cfg).items()))
    override = os.environ.get(JUDGE_ENV_VAR)
    if override:
        resolved["judge"] = override
    return resolved


def _add_config_flags(parser: argparse.ArgumentParser, *names: str) -> None:
    parser.add_argument("--config", help="JSON file with RunConfig values")
    spec = {
        "theta": dict(type=float, help="informativeness threshold"),
        "margin": dict(type=float, help="timing margin in seconds"),
        "fusion": dict(choices=[m.value for m in FusionMode], help="stream fusion mode"),
        "score_position": dict(
            choices=[p.value for p in ScorePosition], help="where the gate reads its score"
        ),
        "dim": dict(type=int, help="feature dimension"),
        "token_cap": dict(type=int, help="per-response token cap"),
        "seed": dict(type=int, help="base RNG seed"),
        "judge": dict(help="judge spec: mock, cmd:..., or an http URL"),
        "jobs": dict(type=int, help="parallel worker cap"),
        "timeout": dict(type=float, help="backend/judge timeout in seconds"),
    }
    for name in names:
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, **spec[name])


def _parse_counts(raw: str) -> dict[dio.Subtask, int]:
    counts: dict[dio.Subtask, int] = {}
    for part in raw.split(","):
        code, _, num = part.partition("=")
        try:
            subtask = dio.Subtask(code.strip().upper())
            counts[subtask] = int(num)
        except (ValueError, KeyError) as exc:
            raise RejectedInput(f"bad counts entry '{part}' (want e.g. vw=70)") from exc
        if counts[subtask] < 0:
            raise RejectedInput(f"count for {subtask.value} must be >= 0")
    return counts


def _cmd_gen_traces(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    if args.counts:
        counts = _parse_counts(args.counts)
    else:
        counts = dio.default_mix(args.total)
    gen_cfg = dio.TraceGenConfig(dim=cfg.dim, margin=cfg.margin if args.store_margin else None)
    bundles = dio.gen_traces(cfg.seed, counts, gen_cfg)
    dio.save_traces(args.out, bundles)
    if args.annotations_out:
        dio.save_annotations(args.annotations_out, [b.annotation for b in bundles])
    print(f"wrote {len(bundles)} traces to {args.out}")
    return 0


def _make_backend(spec: str, cfg: RunConfig, plan, index: int, shift: float, jitter: float, noise_seed: int) -> Backend:
    if spec == "scripted":
        noise = NoiseConfig(shift_seconds=shift, score_jitter=jitter, seed=noise_seed + index)
        return ScriptedBackend(plan, noise)
    if spec.startswith("remote:"):
        host, port = parse_address(spec[len("remote:"):])
        return RemoteBackend(host, port, timeout=cfg.timeout)
    raise RejectedInput(f"unknown backend spec '{spec}' (use scripted or remote:host:port)")


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    bundles = dio.load_traces(args.traces)
    engine_cfg = _engine_config(cfg)

    def run_one(item: tuple[int, dio.TraceBundle]):
        index, bundle = item
        backend = _make_backend(
            args.backend, cfg, bundle.plan, index, args.shift, args.score_jitter, cfg.seed
        )
        return run_session(bundle.events, backend, engine_cfg, question_id=bundle.annotation.id)

    items = list(enumerate(bundles))
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            transcripts = list(pool.map(run_one, items))
    else:
        transcripts = [run_one(item) for item in items]
    dio.save_transcripts(args.out, transcripts)
    aborted = sum(1 for t in transcripts if t.aborted)
    note = f" ({aborted} aborted)" if aborted else ""
    print(f"wrote {len(transcripts)} transcripts to {args.out}{note}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    if bool(args.annotations) == bool(args.traces):
        raise RejectedInput("pass exactly one of --annotations or --traces")
    if args.annotations:
        annotations = dio.load_annotations(args.annotations)
    else:
        annotations = [b.annotation for b in dio.load_traces(args.traces)]
    transcripts = dio.load_transcripts(args.transcripts)
    judge = make_judge(cfg.judge, timeout=cfg.timeout)
    report = evaluate(
        annotations, transcripts, judge,
        default_margin=cfg.margin, jobs=cfg.jobs, config=_provenance(cfg),
    )
    save_report(report, args.out)
    print(emit_report(report, "markdown"), end="")
    print(f"report written to {args.out}")
    return 0


def _default_fixture() -> Path:
    return Path(str(resources.files("vistream.fixtures").joinpath("baseline_rows.csv")))


def _cmd_aggregate(args: argparse.Namespace) -> int:
    path = Path(args.fixtures) if args.fixtures else _default_fixture()
    rows = aggregate_rows(path)
    print(render_aggregate(rows, args.format), end="")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    obj = load_report(args.report)
    if args.format == "json":
        print(json.dumps(obj, indent=2, ensure_ascii=False))
        return 0
    # rebuild just enough of the report to render tables
    from .data import Subtask
    from .evaluator import BenchReport, SubtaskReport

    subtasks = {
        code: SubtaskReport(
            subtask=Subtask(code),
            n_questions=sub["n_questions"],
            time_accuracy=sub["time_accuracy"],
            text_score=sub["text_score"],
        )
        for code, sub in obj["subtasks"].items()
    }
    report = BenchReport(
        subtasks=subtasks, time_all=obj["time_all"], text_all=obj["text_all"],
        overall=obj["overall"], config=obj.get("config", {}),
    )
    print(emit_report(report, args.format), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vistream",
        description="Streaming interaction engine and benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-traces", help="generate a deterministic trace set")
    _add_config_flags(p, "seed", "dim", "margin")
    p.add_argument("--total", type=int, default=700, help="question count, standard mix")
    p.add_argument("--counts", help="explicit mix, e.g. vw=70,aw=140,gu=140,vr=140,vi=70,hr=70,vt=70")
    p.add_argument("--store-margin", action="store_true", help="copy the margin into each annotation")
    p.add_argument("--out", required=True, help="traces JSONL output path")
    p.add_argument("--annotations-out", help="also write bare annotations JSONL here")
    p.set_defaults(func=_cmd_gen_traces)

    p = sub.add_parser("simulate", help="run sessions over a trace set")
    _add_config_flags(p, "theta", "score_position", "fusion", "dim", "token_cap", "seed", "jobs", "timeout")
    p.add_argument("--traces", required=True, help="traces JSONL from gen-traces")
    p.add_argument("--backend", default="scripted", help="scripted or remote:host:port")
    p.add_argument("--shift", type=float, default=0.0, help="scripted plan time shift in seconds")
    p.add_argument("--score-jitter", type=float, default=0.0, help="scripted score noise amplitude")
    p.add_argument("--out", required=True, help="transcripts JSONL output path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("eval", help="score transcripts into a report")
    _add_config_flags(p, "margin", "judge", "jobs", "timeout")
    p.add_argument("--annotations", help="annotations JSONL")
    p.add_argument("--traces", help="traces JSONL (annotations are taken from it)")
    p.add_argument("--transcripts", required=True, help="transcripts JSONL from simulate")
    p.add_argument("--out", default="report.json", help="report output path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("aggregate", help="recompute summary columns for a results CSV")
    p.add_argument("--fixtures", help="per-subtask CSV (default: packaged baseline rows)")
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("report", help="re-render a saved report")
    p.add_argument("--report", required=True, help="report.json path")
    p.add_argument("--format", choices=["markdown", "csv", "json"], default="markdown")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VistreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
