"""End-to-end evaluation runs: retrieve, generate, score, aggregate, emit.

Records are the source of truth: one line-delimited record per question,
written in golden-file order regardless of execution parallelism, with no
volatile fields, so mock-backend runs are byte-reproducible. Report means
are always recomputed from records.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from string import Template
from typing import Sequence

from . import prompts
from .config import ConfigError, RunConfig
from .corpus import (
    Chunk,
    GoldenEntry,
    chunk_document,
    load_corpus,
    parse_golden_dataset,
    read_chunk_dump,
    write_chunk_dump,
)
from .gateway import Backend, ChatRequest, GatewayError, make_backend
from .index import (
    ScoredChunk,
    VectorIndex,
    assemble_context,
    build_index,
    corpus_fingerprint,
    load_index,
    save_index,
    search,
)
from .metrics import (
    METRIC_ORDER,
    EvalSample,
    MetricBundle,
    MetricConfig,
    evaluate_sample,
)
from .retrieval import RetrievalJudgment, RetrievalReport, build_retrieval_report

logger = logging.getLogger(__name__)

RECORDS_FILENAME = "records.jsonl"
TRANSCRIPT_DIRNAME = "transcripts"

REPORT_FORMATS = ("table_text", "delimited", "line_records")

_METRIC_LABELS = {
    "faithfulness": "faithfulness",
    "answer_relevance": "answer_relevance",
    "context_relevance": "context_relevance",
    "factual_correctness": "factual_correctness",
    "answer_similarity": "answer_similarity",
    "answer_correctness": "answer_correctness",
}


class RunError(Exception):
    """An evaluation run could not be completed."""


@dataclass
class EvaluationRecord:
    question_id: str
    question: str
    ground_truth: str
    domain_category: str
    retrieved: list[ScoredChunk]
    context: str
    answer: str
    metrics: MetricBundle
    model_tags: dict[str, str]
    generation_error: str | None = None
    timing: dict[str, float] = field(default_factory=dict)  # in-memory only


def record_to_dict(record: EvaluationRecord) -> dict:
    """Persistable projection of a record; timing is deliberately excluded
    so record files stay byte-stable across runs."""
    return {
        "question_id": record.question_id,
        "question": record.question,
        "ground_truth": record.ground_truth,
        "domain_category": record.domain_category,
        "retrieved": [
            {
                "chunk_id": sc.chunk_id,
                "file_id": sc.file_id,
                "score": sc.score,
                "rank": sc.rank,
            }
            for sc in record.retrieved
        ],
        "context": record.context,
        "answer": record.answer,
        "generation_error": record.generation_error,
        "model_tags": {k: record.model_tags[k] for k in sorted(record.model_tags)},
        "metrics": dict(record.metrics.values(), notes=list(record.metrics.notes)),
    }


def record_from_dict(data: dict) -> EvaluationRecord:
    metric_data = data["metrics"]
    bundle = MetricBundle(notes=list(metric_data.get("notes", [])))
    for name in METRIC_ORDER:
        setattr(bundle, name, metric_data.get(name))
    return EvaluationRecord(
        question_id=data["question_id"],
        question=data["question"],
        ground_truth=data["ground_truth"],
        domain_category=data["domain_category"],
        retrieved=[
            ScoredChunk(
                chunk_id=sc["chunk_id"],
                file_id=sc["file_id"],
                score=sc["score"],
                rank=sc["rank"],
            )
            for sc in data["retrieved"]
        ],
        context=data["context"],
        answer=data["answer"],
        metrics=bundle,
        model_tags=dict(data["model_tags"]),
        generation_error=data.get("generation_error"),
    )


def write_records(records: Sequence[EvaluationRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as sink:
        for record in records:
            sink.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[EvaluationRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(record_from_dict(json.loads(line)))
    return records


@dataclass
class MetricReport:
    model_tag: str
    reproducible: bool
    n_questions: int
    means: dict[str, float | None]
    counts: dict[str, int]
    domain_means: dict[str, dict[str, float | None]]
    domain_sizes: dict[str, int]
    failed: bool = False
    failure_count: int = 0
    retrieval: RetrievalReport | None = None

    def to_dict(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "reproducible": self.reproducible,
            "failed": self.failed,
            "failure_count": self.failure_count,
            "n_questions": self.n_questions,
            "means": {name: self.means[name] for name in METRIC_ORDER},
            "counts": {name: self.counts[name] for name in METRIC_ORDER},
            "domain_means": {
                domain: {name: values[name] for name in METRIC_ORDER}
                for domain, values in sorted(self.domain_means.items())
            },
            "domain_sizes": dict(sorted(self.domain_sizes.items())),
            "retrieval": self.retrieval.to_dict() if self.retrieval else None,
        }

    @staticmethod
    def from_dict(data: dict) -> "MetricReport":
        retrieval = data.get("retrieval")
        return MetricReport(
            model_tag=data["model_tag"],
            reproducible=data["reproducible"],
            n_questions=data["n_questions"],
            means=dict(data["means"]),
            counts=dict(data["counts"]),
            domain_means={d: dict(v) for d, v in data["domain_means"].items()},
            domain_sizes=dict(data["domain_sizes"]),
            failed=data.get("failed", False),
            failure_count=data.get("failure_count", 0),
            retrieval=RetrievalReport.from_dict(retrieval) if retrieval else None,
        )


def build_metric_report(
    records: Sequence[EvaluationRecord],
    *,
    reproducible: bool,
    retrieval: RetrievalReport | None = None,
) -> MetricReport:
    """Aggregate per-metric means over available values, in record order."""
    if not records:
        raise RunError("no records to aggregate")
    model_tag = records[0].model_tags.get("generator", "unknown")

    def _aggregate(subset: Sequence[EvaluationRecord]) -> tuple[dict, dict]:
        sums = {name: 0.0 for name in METRIC_ORDER}
        counts = {name: 0 for name in METRIC_ORDER}
        for record in subset:
            for name, value in record.metrics.values().items():
                if value is not None:
                    sums[name] += value
                    counts[name] += 1
        means = {
            name: (sums[name] / counts[name] if counts[name] else None)
            for name in METRIC_ORDER
        }
        return means, counts

    means, counts = _aggregate(records)
    domains = sorted({r.domain_category for r in records})
    domain_means = {}
    domain_sizes = {}
    for domain in domains:
        subset = [r for r in records if r.domain_category == domain]
        domain_means[domain], _ = _aggregate(subset)
        domain_sizes[domain] = len(subset)
    failure_count = sum(1 for r in records if r.generation_error is not None)
    return MetricReport(
        model_tag=model_tag,
        reproducible=reproducible,
        n_questions=len(records),
        means=means,
        counts=counts,
        domain_means=domain_means,
        domain_sizes=domain_sizes,
        failed=failure_count * 2 > len(records),
        failure_count=failure_count,
        retrieval=retrieval,
    )


def _chunk_dump_path(index_path: Path) -> Path:
    return index_path.parent / (index_path.name + ".chunks.jsonl")


def chunk_corpus(cfg: RunConfig) -> list[Chunk]:
    cfg.require("corpus_path")
    documents = load_corpus(cfg.corpus_path)
    return [c for doc in documents for c in chunk_document(doc, cfg.chunking)]


def build_and_save_index(cfg: RunConfig) -> VectorIndex:
    """The `index` verb: chunk the corpus, embed, save index + chunk dump."""
    cfg.require("corpus_path", "index_path", "embedder")
    chunks = chunk_corpus(cfg)
    index = build_index(chunks, make_backend(cfg.embedder), cfg.embed_batch_size)
    index_path = Path(cfg.index_path)
    index_path.parent.mkdir(parents=True, exist_ok=True)
    save_index(index, index_path)
    write_chunk_dump(chunks, _chunk_dump_path(index_path))
    logger.info(
        "indexed %d chunks (dim %d) -> %s", len(index), index.dimension, index_path
    )
    return index


def load_or_build_index(
    cfg: RunConfig, *, need_chunks: bool
) -> tuple[VectorIndex, dict[str, Chunk]]:
    """Load the index if present, else build from the corpus.

    Chunk texts (needed for context assembly) come from the corpus when
    corpus_path is set, else from the chunk dump written next to the index.
    """
    chunks: list[Chunk] | None = None
    if cfg.corpus_path is not None:
        chunks = chunk_corpus(cfg)
    index_path = Path(cfg.index_path) if cfg.index_path is not None else None
    if index_path is not None and index_path.exists():
        index = load_index(index_path)
        if chunks is None and need_chunks:
            dump = _chunk_dump_path(index_path)
            if not dump.exists():
                raise ConfigError(
                    "cannot resolve chunk texts: set corpus_path or keep the "
                    f"chunk dump {dump} next to the index"
                )
            chunks = read_chunk_dump(dump)
        if chunks is not None:
            fingerprint = corpus_fingerprint(chunks)
            if fingerprint != index.corpus_fingerprint:
                logger.warning(
                    "chunk set fingerprint %s does not match index fingerprint %s",
                    fingerprint[:12],
                    index.corpus_fingerprint[:12],
                )
    else:
        if chunks is None:
            raise ConfigError("no usable index_path and no corpus_path to build from")
        cfg.require("embedder")
        index = build_index(chunks, make_backend(cfg.embedder), cfg.embed_batch_size)
        if index_path is not None:
            index_path.parent.mkdir(parents=True, exist_ok=True)
            save_index(index, index_path)
            write_chunk_dump(chunks, _chunk_dump_path(index_path))
    if cfg.embedder is not None and index.embedder_tag != cfg.embedder.model_name:
        logger.warning(
            "index was built with embedder %r but config names %r",
            index.embedder_tag,
            cfg.embedder.model_name,
        )
    return index, {c.chunk_id: c for c in (chunks or [])}


def _system_prompt(cfg: RunConfig) -> str:
    if cfg.system_prompt_path is not None:
        text = Path(cfg.system_prompt_path).read_text(encoding="utf-8")
    else:
        text = prompts.load_text("generation_system", cfg.template_dir)
    if not text.strip():
        raise ConfigError("system prompt is empty")
    return text


def _metric_config(cfg: RunConfig) -> MetricConfig:
    return MetricConfig(
        n_reverse_questions=cfg.n_reverse_questions,
        weight_factual=cfg.weight_factual,
        weight_similarity=cfg.weight_similarity,
        template_dir=cfg.template_dir,
    )


def _is_reproducible(cfg: RunConfig) -> bool:
    backends = [cfg.embedder, cfg.generator, cfg.judge]
    return all(b is None or b.kind == "mock" for b in backends)


def _model_tags(cfg: RunConfig) -> dict[str, str]:
    tags = {}
    for role in ("embedder", "generator", "judge"):
        backend = getattr(cfg, role)
        if backend is not None:
            tags[role] = backend.model_name
    return tags


def _write_transcripts(record: EvaluationRecord, transcript_dir: Path) -> None:
    payload = {
        "question_id": record.question_id,
        "transcripts": [
            {"metric": t.metric, "prompt": t.prompt, "response": t.response}
            for t in record.metrics.transcripts
        ],
    }
    path = transcript_dir / f"{record.question_id}.json"
    path.write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def run_generation_eval(
    cfg: RunConfig, *, resume: bool = False
) -> tuple[list[EvaluationRecord], MetricReport]:
    """The end-to-end loop: retrieve top-k, generate, score, persist.

    Per-question generation failures yield a record with an empty answer
    and unavailable metrics; the run is marked failed when more than half
    of the questions fail. Records land in golden-file order regardless of
    cfg.parallelism.
    """
    cfg.require("golden_path", "embedder", "generator", "judge")
    entries = parse_golden_dataset(cfg.golden_path)
    if not entries:
        raise RunError(f"golden dataset {cfg.golden_path} has no entries")
    index, chunks_by_id = load_or_build_index(cfg, need_chunks=True)

    embedder = make_backend(cfg.embedder)
    generator = make_backend(cfg.generator)
    judge = make_backend(cfg.judge)
    system_prompt = _system_prompt(cfg)
    user_template = Template(prompts.load_text("generation_user", cfg.template_dir))
    metric_cfg = _metric_config(cfg)
    model_tags = _model_tags(cfg)

    output_dir = Path(cfg.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    transcript_dir = output_dir / TRANSCRIPT_DIRNAME
    transcript_dir.mkdir(exist_ok=True)
    records_path = output_dir / RECORDS_FILENAME

    cached: dict[str, EvaluationRecord] = {}
    if resume and records_path.exists():
        cached = {r.question_id: r for r in read_records(records_path)}
        logger.info("resuming: %d records already present", len(cached))

    query_vectors = embedder.embed_batch([e.question for e in entries])

    def compute(position: int) -> EvaluationRecord:
        entry = entries[position]
        existing = cached.get(entry.question_id)
        if existing is not None:
            return existing
        record = _evaluate_entry(
            entry,
            query_vectors[position],
            index,
            chunks_by_id,
            cfg,
            generator,
            judge,
            embedder,
            system_prompt,
            user_template,
            metric_cfg,
            model_tags,
        )
        _write_transcripts(record, transcript_dir)
        return record

    records: list[EvaluationRecord] = []
    with records_path.open("w", encoding="utf-8") as sink:

        def commit(record: EvaluationRecord) -> None:
            records.append(record)
            sink.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")
            sink.flush()

        if cfg.parallelism == 1:
            for position in range(len(entries)):
                commit(compute(position))
        else:
            with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
                futures = [pool.submit(compute, i) for i in range(len(entries))]
                for future in futures:
                    commit(future.result())

    report = build_metric_report(records, reproducible=_is_reproducible(cfg))
    if report.failed:
        logger.error(
            "run marked failed: %d of %d questions failed generation",
            report.failure_count,
            report.n_questions,
        )
    return records, report


def _evaluate_entry(
    entry: GoldenEntry,
    query_vector,
    index: VectorIndex,
    chunks_by_id: dict[str, Chunk],
    cfg: RunConfig,
    generator: Backend,
    judge: Backend,
    embedder: Backend,
    system_prompt: str,
    user_template: Template,
    metric_cfg: MetricConfig,
    model_tags: dict[str, str],
) -> EvaluationRecord:
    timing: dict[str, float] = {}
    started = time.perf_counter()
    retrieved = search(index, query_vector, cfg.k)
    context = assemble_context(retrieved, chunks_by_id)
    timing["retrieve_s"] = time.perf_counter() - started

    answer = ""
    generation_error: str | None = None
    started = time.perf_counter()
    try:
        request = ChatRequest(
            system_prompt=system_prompt,
            user_prompt=user_template.substitute(question=entry.question, context=context),
            temperature=cfg.generation_temperature,
            max_tokens=cfg.generation_max_tokens,
        )
        answer = generator.chat(request)
    except GatewayError as exc:
        generation_error = str(exc)
        logger.warning("generation failed for %s: %s", entry.question_id, exc)
    timing["generate_s"] = time.perf_counter() - started

    started = time.perf_counter()
    if answer.strip():
        bundle = evaluate_sample(
            EvalSample(
                question=entry.question,
                context=context,
                answer=answer,
                ground_truth=entry.ground_truth,
            ),
            judge,
            embedder,
            metric_cfg,
        )
    else:
        bundle = MetricBundle(notes=["generation failed; metrics unavailable"])
        answer = ""
    timing["score_s"] = time.perf_counter() - started

    return EvaluationRecord(
        question_id=entry.question_id,
        question=entry.question,
        ground_truth=entry.ground_truth,
        domain_category=entry.domain_category,
        retrieved=retrieved,
        context=context,
        answer=answer,
        metrics=bundle,
        model_tags=model_tags,
        generation_error=generation_error,
        timing=timing,
    )


def run_retrieval_eval(cfg: RunConfig, k_values: Sequence[int]) -> RetrievalReport:
    """Retrieve for every golden question and score the rankings."""
    cfg.require("golden_path", "embedder")
    if not k_values:
        raise ConfigError("k_values must be non-empty")
    entries = parse_golden_dataset(cfg.golden_path)
    if not entries:
        raise RunError(f"golden dataset {cfg.golden_path} has no entries")
    index, _ = load_or_build_index(cfg, need_chunks=False)
    embedder = make_backend(cfg.embedder)
    query_vectors = embedder.embed_batch([e.question for e in entries])
    max_k = max(k_values)
    judgments = []
    for entry, vector in zip(entries, query_vectors):
        ranked = tuple(search(index, vector, max_k))
        judgments.append(
            RetrievalJudgment(
                question_id=entry.question_id,
                ranked=ranked,
                relevant_chunk_ids=entry.relevant_chunk_ids,
                relevant_file_ids=entry.relevant_file_ids,
            )
        )
    return build_retrieval_report(judgments, k_values)


def rescore_records(
    cfg: RunConfig, records_path: str | Path | None = None
) -> tuple[list[EvaluationRecord], MetricReport]:
    """The `score` verb: recompute metrics on persisted records without
    re-running retrieval or generation."""
    cfg.require("judge", "embedder")
    path = Path(records_path) if records_path else Path(cfg.output_dir) / RECORDS_FILENAME
    if not path.exists():
        raise ConfigError(f"records file not found: {path}")
    records = read_records(path)
    if not records:
        raise RunError(f"records file {path} is empty")
    judge = make_backend(cfg.judge)
    embedder = make_backend(cfg.embedder)
    metric_cfg = _metric_config(cfg)
    output_dir = Path(cfg.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    transcript_dir = output_dir / TRANSCRIPT_DIRNAME
    transcript_dir.mkdir(exist_ok=True)
    for record in records:
        record.model_tags.update(
            {k: v for k, v in _model_tags(cfg).items() if k in ("judge", "embedder")}
        )
        if not record.answer.strip():
            record.metrics = MetricBundle(notes=["generation failed; metrics unavailable"])
            continue
        record.metrics = evaluate_sample(
            EvalSample(
                question=record.question,
                context=record.context,
                answer=record.answer,
                ground_truth=record.ground_truth,
            ),
            judge,
            embedder,
            metric_cfg,
        )
        _write_transcripts(record, transcript_dir)
    write_records(records, output_dir / RECORDS_FILENAME)
    report = build_metric_report(records, reproducible=_is_reproducible(cfg))
    return records, report


# --- report emission --------------------------------------------------------


def _format_value(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def _generation_rows(reports: Sequence[MetricReport]) -> list[tuple[str, list[float | None]]]:
    return [
        (_METRIC_LABELS[name], [r.means[name] for r in reports]) for name in METRIC_ORDER
    ]


def _retrieval_rows(
    retrievals: Sequence[RetrievalReport],
) -> list[tuple[str, list[float | None]]]:
    """Rows in the fixed family order: hit rate, file hit rate, MRR,
    precision (each per k), then the top-1 cosine mean."""
    k_values = sorted({k for r in retrievals for k in r.k_values})

    def _cell(report: RetrievalReport, table: dict[int, float] | None, k: int) -> float | None:
        if table is None or k not in report.k_values:
            return None
        return table.get(k)

    rows: list[tuple[str, list[float | None]]] = []
    for k in k_values:
        rows.append((f"Hit Rate@{k}", [_cell(r, r.hit_rate, k) for r in retrievals]))
    for k in k_values:
        rows.append(
            (f"File Hit Rate@{k}", [_cell(r, r.file_hit_rate, k) for r in retrievals])
        )
    for k in k_values:
        rows.append((f"MRR@{k}", [_cell(r, r.mrr, k) for r in retrievals]))
    for k in k_values:
        rows.append((f"Precision@{k}", [_cell(r, r.precision, k) for r in retrievals]))
    rows.append(("Cosine Sim (top-1)", [r.mean_top1_cosine for r in retrievals]))
    return rows


def _render_table(
    title: str, columns: Sequence[str], rows: list[tuple[str, list[float | None]]]
) -> str:
    header = ["metric", *columns]
    body = [[label, *(_format_value(v) for v in values)] for label, values in rows]
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    lines = [title]
    lines.append(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(header)).rstrip())
    lines.append("-+-".join("-" * w for w in widths))
    for line in body:
        lines.append(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())
    return "\n".join(lines) + "\n"


def render_report_text(reports: Sequence[MetricReport]) -> str:
    """Tables-shaped text: metric rows by model columns."""
    columns = [r.model_tag for r in reports]
    reproducible = all(r.reproducible for r in reports)
    parts = [
        "answer metrics (mean over available samples)\n"
        + f"reproducible: {'yes' if reproducible else 'no (live backends)'}\n"
    ]
    parts.append(_render_table("", columns, _generation_rows(reports)).lstrip("\n"))
    retrievals = [r.retrieval for r in reports if r.retrieval is not None]
    if retrievals:
        retrieval_columns = [
            r.model_tag for r in reports if r.retrieval is not None
        ]
        parts.append("")
        parts.append(
            _render_table("retrieval metrics", retrieval_columns, _retrieval_rows(retrievals))
        )
    return "\n".join(parts)


def render_retrieval_text(report: RetrievalReport, column: str) -> str:
    return _render_table("retrieval metrics", [column], _retrieval_rows([report]))


def _render_csv(reports: Sequence[MetricReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["metric", *(r.model_tag for r in reports)])
    for label, values in _generation_rows(reports):
        writer.writerow([label, *("" if v is None else repr(v) for v in values)])
    retrievals = [r.retrieval for r in reports if r.retrieval is not None]
    if retrievals:
        for label, values in _retrieval_rows(retrievals):
            writer.writerow([label, *("" if v is None else repr(v) for v in values)])
    return buffer.getvalue()


def _render_json(reports: Sequence[MetricReport]) -> str:
    payload = {"reports": [r.to_dict() for r in reports]}
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def emit_report(
    reports: Sequence[MetricReport],
    records: Sequence[EvaluationRecord] | None,
    output_dir: str | Path,
    formats: Sequence[str] = REPORT_FORMATS,
) -> dict[str, Path]:
    """Write report files; bytes are a pure function of the inputs.

    table_text -> report.txt, delimited -> report.csv, line_records ->
    report.json plus records.jsonl (when records are given).
    """
    unknown = sorted(set(formats) - set(REPORT_FORMATS))
    if unknown:
        raise ValueError(f"unknown report formats: {', '.join(unknown)}")
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if "table_text" in formats:
        path = output_dir / "report.txt"
        path.write_text(render_report_text(reports), encoding="utf-8")
        written["table_text"] = path
    if "delimited" in formats:
        path = output_dir / "report.csv"
        path.write_text(_render_csv(reports), encoding="utf-8")
        written["delimited"] = path
    if "line_records" in formats:
        path = output_dir / "report.json"
        path.write_text(_render_json(reports), encoding="utf-8")
        written["line_records"] = path
        if records is not None:
            records_path = output_dir / RECORDS_FILENAME
            write_records(records, records_path)
            written["records"] = records_path
    return written


def read_report_file(path: str | Path) -> list[MetricReport]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [MetricReport.from_dict(entry) for entry in data["reports"]]


def render_retrieval_tables(pairs: Sequence[tuple[str, RetrievalReport]]) -> str:
    columns = [column for column, _ in pairs]
    return _render_table(
        "retrieval metrics", columns, _retrieval_rows([r for _, r in pairs])
    )


def emit_retrieval_report(
    pairs: Sequence[tuple[str, RetrievalReport]],
    output_dir: str | Path,
    formats: Sequence[str] = REPORT_FORMATS,
) -> dict[str, Path]:
    """Write retrieval-only report files (one column per run)."""
    unknown = sorted(set(formats) - set(REPORT_FORMATS))
    if unknown:
        raise ValueError(f"unknown report formats: {', '.join(unknown)}")
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if "table_text" in formats:
        path = output_dir / "retrieval_report.txt"
        path.write_text(render_retrieval_tables(pairs), encoding="utf-8")
        written["table_text"] = path
    if "delimited" in formats:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["metric", *(column for column, _ in pairs)])
        for label, values in _retrieval_rows([r for _, r in pairs]):
            writer.writerow([label, *("" if v is None else repr(v) for v in values)])
        path = output_dir / "retrieval_report.csv"
        path.write_text(buffer.getvalue(), encoding="utf-8")
        written["delimited"] = path
    if "line_records" in formats:
        payload = {
            "retrieval_reports": [
                {"column": column, "report": report.to_dict()} for column, report in pairs
            ]
        }
        path = output_dir / "retrieval_report.json"
        path.write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        written["line_records"] = path
    return written


def read_retrieval_report_file(path: str | Path) -> list[tuple[str, RetrievalReport]]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        (entry["column"], RetrievalReport.from_dict(entry["report"]))
        for entry in data["retrieval_reports"]
    ]
