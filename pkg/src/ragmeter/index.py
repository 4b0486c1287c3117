"""Dense chunk index: build, serialize, load, and exact cosine top-k search.

Search is exhaustive (the corpus is desk-scale), so results are exact and
easy to cross-check against brute force. Ties are broken by ascending
chunk_id, giving every query a total result order.

Index file layout (all integers little-endian):

    magic    8 bytes  b"RGMINDEX"
    version  u32      currently 1
    dim      u32      embedding dimension
    tag      u32 len + UTF-8 bytes   embedder tag
    fprint   u32 len + UTF-8 bytes   corpus fingerprint (sha256 hex)
    count    u64      number of entries
    entries  count times:
               chunk_id  u32 len + UTF-8 bytes
               file_id   u32 len + UTF-8 bytes
               vector    dim float32 values
    crc32    u32      checksum of every preceding byte
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .corpus import Chunk
from .gateway import Backend, EmbeddingVector, GatewayError, NORM_TOLERANCE

_MAGIC = b"RGMINDEX"
_VERSION = 1


class IndexFormatError(Exception):
    """Index file is corrupt, truncated, or from an unsupported version."""


@dataclass(eq=False)
class VectorIndex:
    dimension: int
    chunk_ids: list[str]
    file_ids: list[str]
    vectors: np.ndarray  # (n, dimension) float32, rows L2-normalized
    embedder_tag: str
    corpus_fingerprint: str

    def __len__(self) -> int:
        return len(self.chunk_ids)

    def validate(self) -> None:
        n = len(self.chunk_ids)
        if len(self.file_ids) != n or self.vectors.shape != (n, self.dimension):
            raise ValueError("index field shapes disagree")
        if len(set(self.chunk_ids)) != n:
            raise ValueError("duplicate chunk_id in index")
        norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
        if n and float(np.max(np.abs(norms - 1.0))) > NORM_TOLERANCE:
            raise ValueError("index contains non-unit vectors")


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    file_id: str
    score: float
    rank: int


def corpus_fingerprint(chunks: Iterable[Chunk]) -> str:
    """sha256 over the sorted (chunk_id, text) pairs, length-prefixed."""
    digest = hashlib.sha256()
    for chunk_id, text in sorted((c.chunk_id, c.text) for c in chunks):
        for part in (chunk_id, text):
            encoded = part.encode("utf-8")
            digest.update(struct.pack("<I", len(encoded)))
            digest.update(encoded)
    return digest.hexdigest()


def build_index(chunks: list[Chunk], embedder: Backend, batch_size: int = 64) -> VectorIndex:
    """Embed all chunks (in batches, order-preserving) into an index."""
    if not chunks:
        raise ValueError("cannot build an index from zero chunks")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    ids = [c.chunk_id for c in chunks]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate chunk ids in input")
    vectors: list[EmbeddingVector] = []
    for lo in range(0, len(chunks), batch_size):
        batch = chunks[lo : lo + batch_size]
        try:
            vectors.extend(embedder.embed_batch([c.text for c in batch]))
        except GatewayError as exc:
            failed = ", ".join(c.chunk_id for c in batch)
            raise GatewayError(f"embedding failed for chunks [{failed}]: {exc}") from exc
    dims = {v.dimension for v in vectors}
    if len(dims) != 1:
        raise GatewayError(f"dimension mismatch across batches: {sorted(dims)}")
    index = VectorIndex(
        dimension=dims.pop(),
        chunk_ids=ids,
        file_ids=[c.file_id for c in chunks],
        vectors=np.stack([v.values for v in vectors]).astype(np.float32),
        embedder_tag=vectors[0].model_tag,
        corpus_fingerprint=corpus_fingerprint(chunks),
    )
    index.validate()
    return index


def search(index: VectorIndex, query_vec: EmbeddingVector | np.ndarray, k: int) -> list[ScoredChunk]:
    """Exact top-k by cosine score, ties broken by ascending chunk_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query = query_vec.values if isinstance(query_vec, EmbeddingVector) else np.asarray(query_vec)
    if query.shape != (index.dimension,):
        raise ValueError(
            f"query dimension {query.shape} does not match index dimension {index.dimension}"
        )
    # Per-row dots, not a matmul: gemv kernels accumulate differently
    # depending on a row's position in the matrix, which would make scores
    # (at the last ulp) depend on insertion order.
    matrix = index.vectors.astype(np.float64)
    query64 = query.astype(np.float64)
    scores = [float(np.dot(matrix[i], query64)) for i in range(len(index))]
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.chunk_ids[i]))
    return [
        ScoredChunk(
            chunk_id=index.chunk_ids[i],
            file_id=index.file_ids[i],
            score=float(scores[i]),
            rank=rank,
        )
        for rank, i in enumerate(order[:k], start=1)
    ]


def assemble_context(results: list[ScoredChunk], chunks_by_id: Mapping[str, Chunk]) -> str:
    """Concatenate retrieved chunks into the generation context string.

    One block per result in rank order: a provenance header line, then the
    chunk text; blocks separated by a blank line. The format is fixed so a
    run can be replayed bit-exactly.
    """
    blocks = []
    for result in results:
        chunk = chunks_by_id.get(result.chunk_id)
        if chunk is None:
            raise KeyError(f"unresolvable chunk id {result.chunk_id!r}")
        header = (
            f"[source: {result.file_id} | chunk: {result.chunk_id}"
            f" | score: {result.score:.4f}]"
        )
        blocks.append(f"{header}\n{chunk.text}")
    return "\n\n".join(blocks)


def _pack_str(value: str) -> bytes:
    encoded = value.encode("utf-8")
    return struct.pack("<I", len(encoded)) + encoded


def save_index(index: VectorIndex, path: str | Path) -> None:
    index.validate()
    body = bytearray()
    body += _MAGIC
    body += struct.pack("<I", _VERSION)
    body += struct.pack("<I", index.dimension)
    body += _pack_str(index.embedder_tag)
    body += _pack_str(index.corpus_fingerprint)
    body += struct.pack("<Q", len(index))
    matrix = np.ascontiguousarray(index.vectors, dtype="<f4")
    for i in range(len(index)):
        body += _pack_str(index.chunk_ids[i])
        body += _pack_str(index.file_ids[i])
        body += matrix[i].tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    Path(path).write_bytes(bytes(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise IndexFormatError("corrupt index: truncated file")
        out = self.data[self.offset : self.offset + n]
        self.offset += n
        return out

    def take_u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def take_u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def take_str(self) -> str:
        length = self.take_u32()
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IndexFormatError(f"corrupt index: bad string: {exc}") from exc


def load_index(path: str | Path) -> VectorIndex:
    data = Path(path).read_bytes()
    if len(data) < len(_MAGIC) + 8 or data[: len(_MAGIC)] != _MAGIC:
        raise IndexFormatError(f"not an index file: {path}")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        raise IndexFormatError("corrupt index: checksum mismatch")
    reader = _Reader(data[:-4])
    reader.take(len(_MAGIC))
    version = reader.take_u32()
    if version != _VERSION:
        raise IndexFormatError(f"unsupported index version {version} (expected {_VERSION})")
    dimension = reader.take_u32()
    embedder_tag = reader.take_str()
    fingerprint = reader.take_str()
    count = reader.take_u64()
    chunk_ids: list[str] = []
    file_ids: list[str] = []
    rows = np.empty((count, dimension), dtype=np.float32)
    for i in range(count):
        chunk_ids.append(reader.take_str())
        file_ids.append(reader.take_str())
        rows[i] = np.frombuffer(reader.take(4 * dimension), dtype="<f4")
    if reader.offset != len(reader.data):
        raise IndexFormatError("corrupt index: trailing bytes")
    index = VectorIndex(
        dimension=dimension,
        chunk_ids=chunk_ids,
        file_ids=file_ids,
        vectors=rows,
        embedder_tag=embedder_tag,
        corpus_fingerprint=fingerprint,
    )
    try:
        index.validate()
    except ValueError as exc:
        raise IndexFormatError(f"corrupt index: {exc}") from exc
    return index
