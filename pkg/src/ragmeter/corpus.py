"""Corpus ingestion: Markdown loading, recursive chunking, golden datasets.

Chunking is position-based: every chunk text is a whitespace-trimmed
contiguous substring of the (normalized) document body, so provenance and
reconstruction checks stay exact.
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Unrecoverable corpus or dataset problem."""


@dataclass(frozen=True)
class Document:
    """A Markdown source document, keyed by its corpus-relative path."""

    file_id: str
    body: str
    title: str | None = None


@dataclass(frozen=True)
class Chunk:
    """A retrievable text segment with provenance back to its document."""

    chunk_id: str
    file_id: str
    ordinal: int
    text: str

    @property
    def char_count(self) -> int:
        return len(self.text)


@dataclass(frozen=True)
class GoldenEntry:
    """One evaluation question with ground truth and relevance labels."""

    question_id: str
    question: str
    ground_truth: str
    relevant_chunk_ids: frozenset[str]
    relevant_file_ids: frozenset[str]
    domain_category: str


@dataclass(frozen=True)
class ChunkConfig:
    max_chars: int = 1500
    min_chars: int = 200
    overlap_chars: int = 0

    def __post_init__(self) -> None:
        if self.min_chars < 1:
            raise ValueError("min_chars must be >= 1")
        if self.max_chars < self.min_chars:
            raise ValueError("max_chars must be >= min_chars")
        if self.overlap_chars < 0:
            raise ValueError("overlap_chars must be >= 0")


_TITLE_RE = re.compile(r"^#{1,6}[ \t]+(.+?)\s*$", re.MULTILINE)


def normalize_text(raw: str) -> str:
    """Normalize line endings to LF and code points to NFC."""
    return unicodedata.normalize("NFC", raw.replace("\r\n", "\n").replace("\r", "\n"))


def load_corpus(root_path: str | Path) -> list[Document]:
    """Load every .md file under root_path as a Document.

    file_id is the relative path with "/" separators; documents come back
    sorted by file_id. Unreadable files are logged and skipped; an empty
    result is fatal.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusError(f"corpus root is not a directory: {root}")
    documents: list[Document] = []
    for path in sorted(root.rglob("*.md")):
        file_id = path.relative_to(root).as_posix()
        try:
            raw = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            logger.warning("skipping unreadable corpus file %s: %s", file_id, exc)
            continue
        body = normalize_text(raw)
        title_match = _TITLE_RE.search(body)
        title = title_match.group(1) if title_match else None
        documents.append(Document(file_id=file_id, body=body, title=title))
    if not documents:
        raise CorpusError(f"empty corpus: no readable .md files under {root}")
    return documents


# Separator hierarchy, coarse to fine. A segment descends one level only
# when it exceeds max_chars at the current level.
_LEVEL_HEADINGS = 0
_LEVEL_PARAGRAPHS = 1
_LEVEL_SENTENCES = 2
_LEVEL_WORDS = 3

_HEADING_RE = re.compile(r"^#{1,6}[ \t]", re.MULTILINE)
_BLANK_LINE_RE = re.compile(r"\n[ \t]*\n+")
# Khmer khan and bariyoosan included: Khmer text has no inter-word spaces,
# so these are the only usable sentence boundaries.
_SENTENCE_END_RE = re.compile(r"[.!?។៕]+")
_WORD_RE = re.compile(r"\S+")


def chunk_document(doc: Document, cfg: ChunkConfig = ChunkConfig()) -> list[Chunk]:
    """Split a document into chunks by the separator hierarchy.

    Splits by Markdown headings, then blank lines, then sentence
    terminators, then whitespace, descending only while a segment exceeds
    cfg.max_chars. Segments shorter than cfg.min_chars merge with their
    successor when the result still fits. A whitespace-only body yields no
    chunks; any other body yields at least one.
    """
    body = doc.body
    span = _trim(body, 0, len(body))
    if span is None:
        return []
    spans = _split_recursive(body, span[0], span[1], _LEVEL_HEADINGS, cfg.max_chars)
    spans = _merge_short(spans, cfg)
    if cfg.overlap_chars:
        spans = _apply_overlap(body, spans, cfg.overlap_chars)
    return [
        Chunk(
            chunk_id=f"{doc.file_id}#{ordinal:04d}",
            file_id=doc.file_id,
            ordinal=ordinal,
            text=body[start:end],
        )
        for ordinal, (start, end) in enumerate(spans)
    ]


def _trim(body: str, start: int, end: int) -> tuple[int, int] | None:
    while start < end and body[start].isspace():
        start += 1
    while end > start and body[end - 1].isspace():
        end -= 1
    return (start, end) if start < end else None


def _split_recursive(
    body: str, start: int, end: int, level: int, max_chars: int
) -> list[tuple[int, int]]:
    if end - start <= max_chars:
        return [(start, end)]
    if level == _LEVEL_WORDS:
        return _pack_words(body, start, end, max_chars)
    parts = _split_at_level(body, start, end, level)
    if len(parts) <= 1:
        return _split_recursive(body, start, end, level + 1, max_chars)
    out: list[tuple[int, int]] = []
    for s, e in parts:
        out.extend(_split_recursive(body, s, e, level + 1, max_chars))
    return out


def _split_at_level(
    body: str, start: int, end: int, level: int
) -> list[tuple[int, int]]:
    cuts: list[tuple[int, int]] = []  # (cut_before, resume_at) pairs
    if level == _LEVEL_HEADINGS:
        for m in _HEADING_RE.finditer(body, start, end):
            if m.start() > start:
                cuts.append((m.start(), m.start()))
    elif level == _LEVEL_PARAGRAPHS:
        for m in _BLANK_LINE_RE.finditer(body, start, end):
            cuts.append((m.start(), m.end()))
    elif level == _LEVEL_SENTENCES:
        for m in _SENTENCE_END_RE.finditer(body, start, end):
            if m.end() < end:
                cuts.append((m.end(), m.end()))
    parts: list[tuple[int, int]] = []
    cursor = start
    for cut_before, resume_at in cuts:
        piece = _trim(body, cursor, cut_before)
        if piece is not None:
            parts.append(piece)
        cursor = resume_at
    piece = _trim(body, cursor, end)
    if piece is not None:
        parts.append(piece)
    return parts


def _pack_words(
    body: str, start: int, end: int, max_chars: int
) -> list[tuple[int, int]]:
    words = [(m.start(), m.end()) for m in _WORD_RE.finditer(body, start, end)]
    spans: list[tuple[int, int]] = []
    window_start, window_end = words[0]
    if window_end - window_start > max_chars:
        logger.warning(
            "unsplittable token of %d chars exceeds max_chars=%d; emitting whole",
            window_end - window_start,
            max_chars,
        )
    for w_start, w_end in words[1:]:
        if w_end - window_start <= max_chars:
            window_end = w_end
        else:
            spans.append((window_start, window_end))
            window_start, window_end = w_start, w_end
            if w_end - w_start > max_chars:
                logger.warning(
                    "unsplittable token of %d chars exceeds max_chars=%d; emitting whole",
                    w_end - w_start,
                    max_chars,
                )
    spans.append((window_start, window_end))
    return spans


def _merge_short(
    spans: list[tuple[int, int]], cfg: ChunkConfig
) -> list[tuple[int, int]]:
    # A short segment absorbs its successor; the merged span includes the
    # original separator text, so contiguity is preserved. Merges that
    # would exceed max_chars are skipped.
    merged: list[tuple[int, int]] = []
    for span in spans:
        if (
            merged
            and merged[-1][1] - merged[-1][0] < cfg.min_chars
            and span[1] - merged[-1][0] <= cfg.max_chars
        ):
            merged[-1] = (merged[-1][0], span[1])
        else:
            merged.append(span)
    if (
        len(merged) >= 2
        and merged[-1][1] - merged[-1][0] < cfg.min_chars
        and merged[-1][1] - merged[-2][0] <= cfg.max_chars
    ):
        merged[-2] = (merged[-2][0], merged[-1][1])
        merged.pop()
    return merged


def _apply_overlap(
    body: str, spans: list[tuple[int, int]], overlap_chars: int
) -> list[tuple[int, int]]:
    # Extend each chunk backwards into its predecessor, snapping onto a
    # word boundary. Overlapping chunks may exceed max_chars by up to
    # overlap_chars and duplicate text; reconstruction checks assume
    # overlap_chars=0.
    out = [spans[0]]
    for i in range(1, len(spans)):
        start, end = spans[i]
        new_start = max(spans[i - 1][0], start - overlap_chars)
        while new_start > spans[i - 1][0] and not body[new_start - 1].isspace():
            new_start += 1
            if new_start >= start:
                break
        out.append((min(new_start, start), end))
    return out


_GOLDEN_FIELDS = (
    "question_id",
    "question",
    "ground_truth",
    "relevant_chunk_ids",
    "relevant_file_ids",
    "domain_category",
)


def parse_golden_dataset(path: str | Path) -> list[GoldenEntry]:
    """Parse a line-delimited golden dataset file.

    Raises CorpusError with the offending line number on malformed JSON,
    missing fields, duplicate question ids, or chunk/file inconsistency.
    """
    path = Path(path)
    entries: list[GoldenEntry] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}: line {lineno}: expected an object")
            missing = [f for f in _GOLDEN_FIELDS if f not in record]
            if missing:
                raise CorpusError(
                    f"{path}: line {lineno}: missing fields: {', '.join(missing)}"
                )
            entry = _build_golden_entry(record, path, lineno)
            if entry.question_id in seen_ids:
                raise CorpusError(
                    f"{path}: line {lineno}: duplicate question_id {entry.question_id!r}"
                )
            seen_ids.add(entry.question_id)
            entries.append(entry)
    return entries


def _build_golden_entry(record: dict, path: Path, lineno: int) -> GoldenEntry:
    question = normalize_text(str(record["question"]))
    ground_truth = normalize_text(str(record["ground_truth"]))
    if not question.strip():
        raise CorpusError(f"{path}: line {lineno}: empty question")
    if not ground_truth.strip():
        raise CorpusError(f"{path}: line {lineno}: empty ground_truth")
    chunk_ids = frozenset(str(c) for c in record["relevant_chunk_ids"])
    file_ids = frozenset(str(f) for f in record["relevant_file_ids"])
    if not file_ids:
        raise CorpusError(f"{path}: line {lineno}: relevant_file_ids is empty")
    for chunk_id in chunk_ids:
        file_of_chunk = chunk_id.rsplit("#", 1)[0]
        if file_of_chunk not in file_ids:
            raise CorpusError(
                f"{path}: line {lineno}: chunk {chunk_id!r} belongs to "
                f"{file_of_chunk!r}, which is not in relevant_file_ids"
            )
    return GoldenEntry(
        question_id=str(record["question_id"]),
        question=question,
        ground_truth=ground_truth,
        relevant_chunk_ids=chunk_ids,
        relevant_file_ids=file_ids,
        domain_category=str(record["domain_category"]),
    )


def serialize_golden_dataset(entries: list[GoldenEntry], path: str | Path) -> None:
    """Write entries in the canonical line-delimited form (sorted id arrays)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for entry in entries:
            record = {
                "question_id": entry.question_id,
                "question": entry.question,
                "ground_truth": entry.ground_truth,
                "relevant_chunk_ids": sorted(entry.relevant_chunk_ids),
                "relevant_file_ids": sorted(entry.relevant_file_ids),
                "domain_category": entry.domain_category,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def write_chunk_dump(chunks: list[Chunk], path: str | Path) -> None:
    """Write chunks in the same line-delimited format as golden datasets."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for chunk in chunks:
            record = {
                "chunk_id": chunk.chunk_id,
                "file_id": chunk.file_id,
                "ordinal": chunk.ordinal,
                "text": chunk.text,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_chunk_dump(path: str | Path) -> list[Chunk]:
    path = Path(path)
    chunks: list[Chunk] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            try:
                chunks.append(
                    Chunk(
                        chunk_id=record["chunk_id"],
                        file_id=record["file_id"],
                        ordinal=int(record["ordinal"]),
                        text=record["text"],
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}: line {lineno}: bad chunk record: {exc}") from exc
    return chunks
