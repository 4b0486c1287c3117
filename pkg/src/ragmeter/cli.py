"""Command-line frontend.

Verbs: index, retrieve-eval, generate-eval, score, report. Exit codes:
0 success, 1 run failure, 2 configuration error. Diagnostics go to
stderr; stdout carries only report text.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, apply_overrides, load_config
from .corpus import CorpusError
from .gateway import GatewayError, make_backend
from .index import IndexFormatError
from .runner import (
    REPORT_FORMATS,
    RunError,
    build_and_save_index,
    emit_report,
    emit_retrieval_report,
    read_report_file,
    read_retrieval_report_file,
    render_report_text,
    render_retrieval_tables,
    rescore_records,
    run_generation_eval,
    run_retrieval_eval,
)

logger = logging.getLogger(__name__)

_OVERRIDE_FIELDS = (
    "corpus_path",
    "golden_path",
    "index_path",
    "output_dir",
    "k",
    "parallelism",
    "seed",
    "system_prompt_path",
    "template_dir",
)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, help="YAML config file")
    sub.add_argument("--corpus-path", dest="corpus_path", type=Path)
    sub.add_argument("--golden-path", dest="golden_path", type=Path)
    sub.add_argument("--index-path", dest="index_path", type=Path)
    sub.add_argument("--output-dir", dest="output_dir", type=Path)
    sub.add_argument("--k", type=int)
    sub.add_argument("--parallelism", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--system-prompt-path", dest="system_prompt_path", type=Path)
    sub.add_argument("--template-dir", dest="template_dir", type=Path)
    sub.add_argument(
        "--dry-run",
        action="store_true",
        help="validate configuration and fixtures without calling backends",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragmeter",
        description="Evaluate retrieval-augmented generation pipelines.",
    )
    sub = parser.add_subparsers(dest="verb")

    p_index = sub.add_parser("index", help="chunk the corpus and build the vector index")
    _add_common(p_index)

    p_retrieve = sub.add_parser("retrieve-eval", help="score retrieval on the golden dataset")
    _add_common(p_retrieve)
    p_retrieve.add_argument(
        "--k-values",
        default="1,3,5,10",
        help="comma-separated cutoffs, default 1,3,5,10",
    )

    p_generate = sub.add_parser("generate-eval", help="run the full generation evaluation")
    _add_common(p_generate)
    p_generate.add_argument(
        "--resume",
        action="store_true",
        help="reuse records already present in the output dir",
    )

    p_score = sub.add_parser("score", help="re-score persisted records without re-generating")
    _add_common(p_score)
    p_score.add_argument("--records", type=Path, help="records file (default: output_dir/records.jsonl)")

    p_report = sub.add_parser("report", help="merge and emit reports from recorded runs")
    p_report.add_argument("--inputs", nargs="*", type=Path, default=[],
                          help="report.json files from generate-eval or score runs")
    p_report.add_argument("--retrieval-inputs", nargs="*", type=Path, default=[],
                          help="retrieval_report.json files from retrieve-eval runs")
    p_report.add_argument("--output-dir", dest="output_dir", type=Path)
    p_report.add_argument("--formats", default=",".join(REPORT_FORMATS),
                          help=f"comma-separated subset of {', '.join(REPORT_FORMATS)}")

    return parser


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {
        name: getattr(args, name)
        for name in _OVERRIDE_FIELDS
        if getattr(args, name, None) is not None
    }
    return apply_overrides(cfg, **overrides)


def _parse_k_values(spec: str) -> list[int]:
    try:
        values = sorted({int(part) for part in spec.split(",") if part.strip()})
    except ValueError as exc:
        raise ConfigError(f"bad --k-values {spec!r}: {exc}") from exc
    if not values or values[0] < 1:
        raise ConfigError(f"bad --k-values {spec!r}: cutoffs must be >= 1")
    return values


def _dry_run(cfg: RunConfig, verb: str) -> int:
    if verb == "index":
        cfg.require("corpus_path", "index_path", "embedder")
    elif verb == "retrieve-eval":
        cfg.require("golden_path", "embedder")
    elif verb == "generate-eval":
        cfg.require("golden_path", "embedder", "generator", "judge")
    elif verb == "score":
        cfg.require("judge", "embedder")
    for name, path in (("corpus_path", cfg.corpus_path), ("golden_path", cfg.golden_path)):
        if path is not None and not Path(path).exists():
            raise ConfigError(f"{name} does not exist: {path}")
    for role in ("embedder", "generator", "judge"):
        backend_cfg = getattr(cfg, role)
        if backend_cfg is not None and backend_cfg.kind == "mock":
            try:
                make_backend(backend_cfg)  # loads and validates fixture files
            except GatewayError as exc:
                raise ConfigError(f"{role}: {exc}") from exc
    print("dry run: configuration ok", file=sys.stderr)
    return 0


def _cmd_index(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    if args.dry_run:
        return _dry_run(cfg, "index")
    build_and_save_index(cfg)
    return 0


def _cmd_retrieve_eval(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    k_values = _parse_k_values(args.k_values)
    if args.dry_run:
        return _dry_run(cfg, "retrieve-eval")
    report = run_retrieval_eval(cfg, k_values)
    column = cfg.embedder.model_name if cfg.embedder else "embedder"
    emit_retrieval_report([(column, report)], cfg.output_dir)
    sys.stdout.write(render_retrieval_tables([(column, report)]))
    return 0


def _cmd_generate_eval(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    if args.dry_run:
        return _dry_run(cfg, "generate-eval")
    records, report = run_generation_eval(cfg, resume=args.resume)
    emit_report([report], None, cfg.output_dir)  # records.jsonl already written
    sys.stdout.write(render_report_text([report]))
    if report.failed:
        print(
            f"run failed: {report.failure_count} of {report.n_questions} generations failed",
            file=sys.stderr,
        )
        return 1
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    if args.dry_run:
        return _dry_run(cfg, "score")
    records, report = rescore_records(cfg, args.records)
    emit_report([report], None, cfg.output_dir)
    sys.stdout.write(render_report_text([report]))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    formats = [part.strip() for part in args.formats.split(",") if part.strip()]
    unknown = sorted(set(formats) - set(REPORT_FORMATS))
    if unknown:
        raise ConfigError(f"unknown report formats: {', '.join(unknown)}")
    if not args.inputs and not args.retrieval_inputs:
        raise ConfigError("report requires --inputs and/or --retrieval-inputs")
    reports = [r for path in args.inputs for r in read_report_file(path)]
    retrieval_pairs = [
        pair for path in args.retrieval_inputs for pair in read_retrieval_report_file(path)
    ]
    if reports and retrieval_pairs:
        if len(reports) == len(retrieval_pairs):
            for report, (_, retrieval) in zip(reports, retrieval_pairs):
                report.retrieval = retrieval
        else:
            raise ConfigError(
                f"cannot pair {len(reports)} reports with "
                f"{len(retrieval_pairs)} retrieval reports"
            )
    output = ""
    if reports:
        if args.output_dir is not None:
            emit_report(reports, None, args.output_dir, formats)
        output = render_report_text(reports)
    elif retrieval_pairs:
        if args.output_dir is not None:
            emit_retrieval_report(retrieval_pairs, args.output_dir, formats)
        output = render_retrieval_tables(retrieval_pairs)
    sys.stdout.write(output)
    return 0


_COMMANDS = {
    "index": _cmd_index,
    "retrieve-eval": _cmd_retrieve_eval,
    "generate-eval": _cmd_generate_eval,
    "score": _cmd_score,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verb is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return _COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, GatewayError, IndexFormatError, RunError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
