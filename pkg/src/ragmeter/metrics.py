"""Answer-quality metrics: six judge- and embedding-based scores.

faithfulness        supported statements / total statements
answer_relevance    mean cosine between the question and questions
                    regenerated from the answer
context_relevance   cosine between question and retrieved context
factual_correctness half-weighted F1 over judge-classified TP/FP/FN
answer_similarity   cosine between answer and ground truth
answer_correctness  weighted sum of factual_correctness and answer_similarity

All cosines are clamped to [0, 1]. Judge failures degrade only the metrics
that depend on them; the bundle records a note per degraded metric.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from string import Template

import numpy as np

from . import prompts
from .gateway import Backend, EmptyResponseError, GatewayError

logger = logging.getLogger(__name__)

# Appended when the first judge response cannot be parsed; one retry only.
STRICT_LIST_SUFFIX = (
    "Output one statement per line and nothing else. No preamble, no commentary."
)
STRICT_CLASSIFICATION_SUFFIX = (
    'Reply with exactly three sections labeled "TP:", "FP:" and "FN:", '
    "one item per line under each, or the single word None."
)

METRIC_ORDER = (
    "faithfulness",
    "answer_relevance",
    "context_relevance",
    "factual_correctness",
    "answer_similarity",
    "answer_correctness",
)


class MetricUnavailable(Exception):
    """A metric could not be computed for this sample."""


@dataclass(frozen=True)
class EvalSample:
    question: str
    context: str
    answer: str
    ground_truth: str

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError("question must be non-empty")
        if not self.answer.strip():
            raise ValueError("answer must be non-empty")


@dataclass(frozen=True)
class StatementSet:
    statements: tuple[str, ...]
    source: str  # "answer" or "ground_truth"


@dataclass(frozen=True)
class Verdict:
    statement: str
    supported: bool
    rationale: str


@dataclass(frozen=True)
class VerdictSet:
    verdicts: tuple[Verdict, ...]

    @property
    def supported_count(self) -> int:
        return sum(1 for v in self.verdicts if v.supported)


@dataclass(frozen=True)
class FactualClassification:
    tp: tuple[str, ...]
    fp: tuple[str, ...]
    fn: tuple[str, ...]

    @property
    def degenerate(self) -> bool:
        return not (self.tp or self.fp or self.fn)


@dataclass(frozen=True)
class JudgeTranscript:
    metric: str
    prompt: str
    response: str


@dataclass
class MetricBundle:
    faithfulness: float | None = None
    answer_relevance: float | None = None
    context_relevance: float | None = None
    factual_correctness: float | None = None
    answer_similarity: float | None = None
    answer_correctness: float | None = None
    transcripts: list[JudgeTranscript] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def values(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRIC_ORDER}


@dataclass(frozen=True)
class MetricConfig:
    n_reverse_questions: int = 3
    weight_factual: float = 0.5
    weight_similarity: float = 0.5
    template_dir: str | Path | None = None

    def __post_init__(self) -> None:
        if self.n_reverse_questions < 1:
            raise ValueError("n_reverse_questions must be >= 1")
        _check_weights(self.weight_factual, self.weight_similarity)


def _check_weights(w1: float, w2: float) -> None:
    if w1 < 0 or w2 < 0:
        raise ValueError("metric weights must be non-negative")
    if abs(w1 + w2 - 1.0) > 1e-9:
        raise ValueError(f"metric weights must sum to 1, got {w1} + {w2}")


def _template(name: str, cfg: MetricConfig) -> Template:
    return prompts.load_template(name, cfg.template_dir)


def _record(
    transcripts: list[JudgeTranscript] | None, metric: str, prompt: str, response: str
) -> None:
    if transcripts is not None:
        transcripts.append(JudgeTranscript(metric=metric, prompt=prompt, response=response))


def clamp01(value: float) -> float:
    return max(0.0, min(1.0, value))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)))


_ITEM_PREFIX_RE = re.compile(
    r"^\s*(?:[-*•]+\s*|\(?\d+[.):]\s*|statement\s*\d+\s*[:.]\s*)", re.IGNORECASE
)


def parse_list_items(text: str) -> list[str]:
    """Parse numbered, bulleted, or bare line items; dedup keeps first."""
    items: list[str] = []
    seen: set[str] = set()
    for line in text.splitlines():
        item = _ITEM_PREFIX_RE.sub("", line).strip()
        if not item or item in seen:
            continue
        seen.add(item)
        items.append(item)
    return items


def decompose_statements(
    sample: EvalSample,
    judge: Backend,
    cfg: MetricConfig = MetricConfig(),
    transcripts: list[JudgeTranscript] | None = None,
) -> StatementSet:
    """Ask the judge to break the answer into atomic statements."""
    prompt = _template("statement_decomposition", cfg).substitute(
        question=sample.question, answer=sample.answer
    )
    statements = _judge_list(judge, prompt, "statement_decomposition", transcripts)
    if not statements:
        strict_prompt = f"{prompt}\n\n{STRICT_LIST_SUFFIX}"
        statements = _judge_list(
            judge, strict_prompt, "statement_decomposition_retry", transcripts
        )
    if not statements:
        raise MetricUnavailable("judge produced no parseable statements")
    return StatementSet(statements=tuple(statements), source="answer")


def _judge_list(
    judge: Backend,
    prompt: str,
    metric: str,
    transcripts: list[JudgeTranscript] | None,
) -> list[str]:
    # An empty completion is the typed outcome the backend contract allows;
    # treat it as zero parseable items so the strict retry can fire.
    try:
        response = judge.judge(prompt)
    except EmptyResponseError:
        _record(transcripts, metric, prompt, "")
        return []
    _record(transcripts, metric, prompt, response)
    return parse_list_items(response)


_VERDICT_RE = re.compile(
    r"^\W*(?:verdict\s*[:.]?\s*)?(yes|no)\b[:.,]?\s*(.*)$", re.IGNORECASE | re.DOTALL
)


def statement_verdicts(
    sample: EvalSample,
    statements: StatementSet,
    judge: Backend,
    cfg: MetricConfig = MetricConfig(),
    transcripts: list[JudgeTranscript] | None = None,
) -> VerdictSet:
    """One judge call per statement, checked against the retrieved context."""
    template = _template("statement_verdict", cfg)
    verdicts: list[Verdict] = []
    for statement in statements.statements:
        prompt = template.substitute(context=sample.context, statement=statement)
        response = judge.judge(prompt)
        _record(transcripts, "statement_verdict", prompt, response)
        match = _VERDICT_RE.match(response.strip())
        if match is None:
            logger.warning("unparseable verdict counted as unsupported: %r", response[:80])
            verdicts.append(
                Verdict(statement=statement, supported=False, rationale="unparseable verdict")
            )
            continue
        verdicts.append(
            Verdict(
                statement=statement,
                supported=match.group(1).lower() == "yes",
                rationale=match.group(2).strip(),
            )
        )
    return VerdictSet(verdicts=tuple(verdicts))


def faithfulness(
    sample: EvalSample,
    judge: Backend,
    cfg: MetricConfig = MetricConfig(),
    transcripts: list[JudgeTranscript] | None = None,
    statements: StatementSet | None = None,
) -> float:
    """Supported statements over total statements."""
    if statements is None:
        statements = decompose_statements(sample, judge, cfg, transcripts)
    if not statements.statements:
        raise MetricUnavailable("no statements to verify")
    verdicts = statement_verdicts(sample, statements, judge, cfg, transcripts)
    return verdicts.supported_count / len(statements.statements)


def answer_relevance(
    sample: EvalSample,
    judge: Backend,
    embedder: Backend,
    n: int | None = None,
    cfg: MetricConfig = MetricConfig(),
    transcripts: list[JudgeTranscript] | None = None,
) -> float:
    """Mean cosine between the question and n judge-regenerated questions.

    Judge calls that fail or return nothing parseable are skipped; the
    mean runs over the questions obtained. Zero questions is an error.
    """
    total = n if n is not None else cfg.n_reverse_questions
    template = _template("reverse_question", cfg)
    generated: list[str] = []
    for variant in range(1, total + 1):
        prompt = template.substitute(answer=sample.answer, variant=variant, total=total)
        try:
            response = judge.judge(prompt)
        except GatewayError as exc:
            logger.warning("reverse question %d/%d failed: %s", variant, total, exc)
            continue
        _record(transcripts, "reverse_question", prompt, response)
        lines = parse_list_items(response)
        if lines:
            generated.append(lines[0])
    if not generated:
        raise MetricUnavailable("no reverse questions obtained")
    if len(generated) < total:
        logger.warning("only %d of %d reverse questions obtained", len(generated), total)
    vectors = embedder.embed_batch([sample.question] + generated)
    question_vec = vectors[0].values
    sims = [clamp01(cosine(question_vec, v.values)) for v in vectors[1:]]
    return sum(sims) / len(sims)


def context_relevance(
    sample: EvalSample, embedder: Backend, cfg: MetricConfig = MetricConfig()
) -> float:
    """Cosine between question and concatenated context; no judge involved."""
    if not sample.context.strip():
        raise MetricUnavailable("empty context")
    vectors = embedder.embed_batch([sample.question, sample.context])
    return clamp01(cosine(vectors[0].values, vectors[1].values))


def answer_similarity(
    sample: EvalSample, embedder: Backend, cfg: MetricConfig = MetricConfig()
) -> float:
    """Cosine between generated answer and ground truth; no judge involved."""
    if not sample.ground_truth.strip():
        raise MetricUnavailable("empty ground truth")
    vectors = embedder.embed_batch([sample.answer, sample.ground_truth])
    return clamp01(cosine(vectors[0].values, vectors[1].values))


_SECTION_RE = re.compile(
    r"^\s*(?:\*\*)?\s*(?:(?:true|false)\s+(?:positives?|negatives?)\s*)?"
    r"\(?(tp|fp|fn)\)?\s*(?:\*\*)?\s*:\s*(.*)$",
    re.IGNORECASE,
)


def parse_classification(text: str) -> FactualClassification | None:
    """Extract TP/FP/FN sections; None when no section label is found."""
    sections: dict[str, list[str]] = {"tp": [], "fp": [], "fn": []}
    current: str | None = None
    found = False
    for line in text.splitlines():
        match = _SECTION_RE.match(line)
        if match:
            current = match.group(1).lower()
            found = True
            inline = match.group(2).strip()
            if inline and inline.lower() not in ("none", "none."):
                sections[current].append(inline)
            continue
        if current is None:
            continue
        items = parse_list_items(line)
        for item in items:
            if item.lower() not in ("none", "none."):
                sections[current].append(item)
    if not found:
        return None
    # Enforce pairwise-disjoint lists deterministically: TP wins over FP over FN.
    tp = list(dict.fromkeys(sections["tp"]))
    fp = [s for s in dict.fromkeys(sections["fp"]) if s not in set(tp)]
    fn = [s for s in dict.fromkeys(sections["fn"]) if s not in set(tp) | set(fp)]
    return FactualClassification(tp=tuple(tp), fp=tuple(fp), fn=tuple(fn))


def factual_f1(tp: int, fp: int, fn: int) -> float:
    """Half-weighted F1 over classification counts; 0 when all counts are 0."""
    if tp < 0 or fp < 0 or fn < 0:
        raise ValueError("classification counts must be non-negative")
    denominator = tp + 0.5 * (fp + fn)
    if denominator == 0:
        return 0.0
    return tp / denominator


def factual_correctness(
    sample: EvalSample,
    judge: Backend,
    cfg: MetricConfig = MetricConfig(),
    transcripts: list[JudgeTranscript] | None = None,
) -> tuple[float, FactualClassification]:
    """Judge classifies answer vs. ground truth into TP/FP/FN; score is the
    half-weighted F1. An all-empty classification scores 0 and is flagged
    via FactualClassification.degenerate."""
    if not sample.ground_truth.strip():
        raise MetricUnavailable("empty ground truth")
    prompt = _template("factual_classification", cfg).substitute(
        question=sample.question, answer=sample.answer, ground_truth=sample.ground_truth
    )
    classification = _judge_classification(judge, prompt, "factual_classification", transcripts)
    if classification is None:
        strict_prompt = f"{prompt}\n\n{STRICT_CLASSIFICATION_SUFFIX}"
        classification = _judge_classification(
            judge, strict_prompt, "factual_classification_retry", transcripts
        )
    if classification is None:
        raise MetricUnavailable("judge classification was unparseable")
    if classification.degenerate:
        logger.warning("degenerate classification: no statements on either side")
    score = factual_f1(len(classification.tp), len(classification.fp), len(classification.fn))
    return score, classification


def _judge_classification(
    judge: Backend,
    prompt: str,
    metric: str,
    transcripts: list[JudgeTranscript] | None,
) -> FactualClassification | None:
    try:
        response = judge.judge(prompt)
    except EmptyResponseError:
        _record(transcripts, metric, prompt, "")
        return None
    _record(transcripts, metric, prompt, response)
    return parse_classification(response)


def answer_correctness(
    fac_cor: float, ans_sim: float, w1: float = 0.5, w2: float = 0.5
) -> float:
    """Weighted sum of factual correctness and answer similarity."""
    _check_weights(w1, w2)
    if not (0.0 <= fac_cor <= 1.0 and 0.0 <= ans_sim <= 1.0):
        raise ValueError("inputs must lie in [0, 1]")
    return w1 * fac_cor + w2 * ans_sim


def evaluate_sample(
    sample: EvalSample,
    judge: Backend,
    embedder: Backend,
    cfg: MetricConfig = MetricConfig(),
) -> MetricBundle:
    """Compute all six metrics; each failure degrades only its own field.

    Execution order is fixed (statement decomposition, verdicts, reverse
    questions, the two embedding similarities, classification), so runs
    with mock backends are reproducible bit for bit.
    """
    bundle = MetricBundle()

    statements: StatementSet | None = None
    try:
        statements = decompose_statements(sample, judge, cfg, bundle.transcripts)
        bundle.faithfulness = faithfulness(
            sample, judge, cfg, bundle.transcripts, statements=statements
        )
    except (MetricUnavailable, GatewayError) as exc:
        bundle.notes.append(f"faithfulness: {exc}")

    try:
        bundle.answer_relevance = answer_relevance(
            sample, judge, embedder, cfg=cfg, transcripts=bundle.transcripts
        )
    except (MetricUnavailable, GatewayError) as exc:
        bundle.notes.append(f"answer_relevance: {exc}")

    try:
        bundle.context_relevance = context_relevance(sample, embedder, cfg)
    except (MetricUnavailable, GatewayError) as exc:
        bundle.notes.append(f"context_relevance: {exc}")

    try:
        bundle.answer_similarity = answer_similarity(sample, embedder, cfg)
    except (MetricUnavailable, GatewayError) as exc:
        bundle.notes.append(f"answer_similarity: {exc}")

    try:
        score, classification = factual_correctness(sample, judge, cfg, bundle.transcripts)
        bundle.factual_correctness = score
        if classification.degenerate:
            bundle.notes.append("factual_correctness: degenerate classification")
    except (MetricUnavailable, GatewayError) as exc:
        bundle.notes.append(f"factual_correctness: {exc}")

    if bundle.factual_correctness is not None and bundle.answer_similarity is not None:
        bundle.answer_correctness = answer_correctness(
            bundle.factual_correctness,
            bundle.answer_similarity,
            cfg.weight_factual,
            cfg.weight_similarity,
        )
    return bundle
