"""Retrieval quality metrics over golden-dataset judgments.

Chunk-level metrics (hit rate, MRR, precision) average over questions that
carry chunk-level relevance labels; file-level hit rate and the top-1
cosine average run over every question.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .index import ScoredChunk


class NoEligibleQuestionsError(ValueError):
    """No question carries the labels a metric needs."""


@dataclass(frozen=True)
class RetrievalJudgment:
    question_id: str
    ranked: tuple[ScoredChunk, ...]
    relevant_chunk_ids: frozenset[str]
    relevant_file_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not self.ranked:
            raise ValueError("ranked results must be non-empty")
        ranks = [sc.rank for sc in self.ranked]
        if ranks != list(range(1, len(ranks) + 1)):
            raise ValueError("ranked results must have consecutive ranks from 1")


@dataclass(frozen=True)
class RetrievalReport:
    k_values: tuple[int, ...]
    hit_rate: dict[int, float] | None
    file_hit_rate: dict[int, float]
    mrr: dict[int, float] | None
    precision: dict[int, float] | None
    mean_top1_cosine: float
    n_questions: int
    n_chunk_labeled: int

    def to_dict(self) -> dict:
        def _by_k(values: dict[int, float] | None) -> dict[str, float] | None:
            if values is None:
                return None
            return {str(k): values[k] for k in self.k_values}

        return {
            "k_values": list(self.k_values),
            "hit_rate": _by_k(self.hit_rate),
            "file_hit_rate": _by_k(self.file_hit_rate),
            "mrr": _by_k(self.mrr),
            "precision": _by_k(self.precision),
            "mean_top1_cosine": self.mean_top1_cosine,
            "n_questions": self.n_questions,
            "n_chunk_labeled": self.n_chunk_labeled,
        }

    @staticmethod
    def from_dict(data: dict) -> "RetrievalReport":
        def _keyed(values: dict | None) -> dict[int, float] | None:
            if values is None:
                return None
            return {int(k): float(v) for k, v in values.items()}

        return RetrievalReport(
            k_values=tuple(int(k) for k in data["k_values"]),
            hit_rate=_keyed(data["hit_rate"]),
            file_hit_rate=_keyed(data["file_hit_rate"]) or {},
            mrr=_keyed(data["mrr"]),
            precision=_keyed(data["precision"]),
            mean_top1_cosine=float(data["mean_top1_cosine"]),
            n_questions=int(data["n_questions"]),
            n_chunk_labeled=int(data["n_chunk_labeled"]),
        )


def _chunk_labeled(judgments: Sequence[RetrievalJudgment]) -> list[RetrievalJudgment]:
    eligible = [j for j in judgments if j.relevant_chunk_ids]
    if not eligible:
        raise NoEligibleQuestionsError("no chunk-labeled questions")
    return eligible


def _chunk_hit(judgment: RetrievalJudgment, k: int) -> bool:
    return any(sc.chunk_id in judgment.relevant_chunk_ids for sc in judgment.ranked[:k])


def hit_rate_at_k(judgments: Sequence[RetrievalJudgment], k: int) -> float:
    """Fraction of chunk-labeled questions with a relevant chunk in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    eligible = _chunk_labeled(judgments)
    return sum(1 for j in eligible if _chunk_hit(j, k)) / len(eligible)


def file_hit_rate_at_k(judgments: Sequence[RetrievalJudgment], k: int) -> float:
    """Fraction of all questions with a chunk from a relevant file in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not judgments:
        raise ValueError("no judgments")
    hits = sum(
        1
        for j in judgments
        if any(sc.file_id in j.relevant_file_ids for sc in j.ranked[:k])
    )
    return hits / len(judgments)


def mrr_at_k(judgments: Sequence[RetrievalJudgment], k: int) -> float:
    """Mean reciprocal rank of the first relevant chunk within the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    eligible = _chunk_labeled(judgments)
    total = 0.0
    for j in eligible:
        for sc in j.ranked[:k]:
            if sc.chunk_id in j.relevant_chunk_ids:
                total += 1.0 / sc.rank
                break
    return total / len(eligible)


def precision_at_k(judgments: Sequence[RetrievalJudgment], k: int) -> float:
    """Mean fraction of the top k that is relevant; denominator is k itself."""
    if k < 1:
        raise ValueError("k must be >= 1")
    eligible = _chunk_labeled(judgments)
    total = 0.0
    for j in eligible:
        total += sum(1 for sc in j.ranked[:k] if sc.chunk_id in j.relevant_chunk_ids) / k
    return total / len(eligible)


def mean_top1_cosine(judgments: Sequence[RetrievalJudgment]) -> float:
    """Mean similarity score of the rank-1 result across all questions."""
    if not judgments:
        raise ValueError("no judgments")
    return sum(j.ranked[0].score for j in judgments) / len(judgments)


def build_retrieval_report(
    judgments: Sequence[RetrievalJudgment], k_values: Sequence[int]
) -> RetrievalReport:
    """Compute every metric at every k; chunk-level maps are None when no
    question carries chunk labels."""
    if not judgments:
        raise ValueError("no judgments")
    if not k_values:
        raise ValueError("k_values must be non-empty")
    ks = tuple(sorted(set(int(k) for k in k_values)))
    n_chunk_labeled = sum(1 for j in judgments if j.relevant_chunk_ids)
    hit: dict[int, float] | None
    mrr: dict[int, float] | None
    precision: dict[int, float] | None
    if n_chunk_labeled:
        hit = {k: hit_rate_at_k(judgments, k) for k in ks}
        mrr = {k: mrr_at_k(judgments, k) for k in ks}
        precision = {k: precision_at_k(judgments, k) for k in ks}
    else:
        hit = mrr = precision = None
    return RetrievalReport(
        k_values=ks,
        hit_rate=hit,
        file_hit_rate={k: file_hit_rate_at_k(judgments, k) for k in ks},
        mrr=mrr,
        precision=precision,
        mean_top1_cosine=mean_top1_cosine(judgments),
        n_questions=len(judgments),
        n_chunk_labeled=n_chunk_labeled,
    )
