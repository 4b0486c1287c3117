"""Vector index tests: build, search vs. brute force, serialization."""

import numpy as np
import pytest

from helpers import brute_force_search, make_mock
from ragmeter.corpus import Chunk
from ragmeter.gateway import EmbeddingVector, GatewayError
from ragmeter.index import (
    IndexFormatError,
    VectorIndex,
    assemble_context,
    build_index,
    corpus_fingerprint,
    load_index,
    save_index,
    search,
)


def _chunks(n, file_id="f.md", prefix="chunk text"):
    return [
        Chunk(chunk_id=f"{file_id}#{i:04d}", file_id=file_id, ordinal=i,
              text=f"{prefix} {i} with distinct words {i * 7}")
        for i in range(n)
    ]


def _random_index(rng, n, d, duplicate_rows=0):
    vectors = rng.standard_normal((n, d))
    for i in range(duplicate_rows):
        vectors[n - 1 - i] = vectors[i]
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    vectors = vectors.astype(np.float32)
    # renormalize in float64 so rows stay unit after the float32 cast
    vectors = (vectors.astype(np.float64) /
               np.linalg.norm(vectors.astype(np.float64), axis=1, keepdims=True)).astype(np.float32)
    ids = [f"f{i % 5}.md#{i:04d}" for i in range(n)]
    files = [f"f{i % 5}.md" for i in range(n)]
    return VectorIndex(
        dimension=d,
        chunk_ids=ids,
        file_ids=files,
        vectors=vectors,
        embedder_tag="random",
        corpus_fingerprint="none",
    )


class TestBuildIndex:
    def test_five_chunks_batch_two(self):
        chunks = _chunks(5)
        index = build_index(chunks, make_mock(), batch_size=2)
        assert len(index) == 5
        assert index.chunk_ids == [c.chunk_id for c in chunks]
        assert index.vectors.shape == (5, 64)
        assert index.embedder_tag == "mock-model"

    def test_rebuild_identical_bytes(self, tmp_path):
        chunks = _chunks(6)
        a = tmp_path / "a.idx"
        b = tmp_path / "b.idx"
        save_index(build_index(chunks, make_mock(), batch_size=3), a)
        save_index(build_index(chunks, make_mock(), batch_size=3), b)
        assert a.read_bytes() == b.read_bytes()

    def test_fingerprint_avalanche(self):
        # Oracle: mutate each chunk's text by one character; the fingerprint
        # must change every single time.
        chunks = _chunks(8)
        base = corpus_fingerprint(chunks)
        for i in range(len(chunks)):
            mutated = list(chunks)
            mutated[i] = Chunk(
                chunk_id=chunks[i].chunk_id,
                file_id=chunks[i].file_id,
                ordinal=chunks[i].ordinal,
                text=chunks[i].text + "x",
            )
            assert corpus_fingerprint(mutated) != base

    def test_fingerprint_order_independent(self):
        chunks = _chunks(5)
        assert corpus_fingerprint(chunks) == corpus_fingerprint(list(reversed(chunks)))

    def test_empty_and_duplicate_inputs_rejected(self):
        with pytest.raises(ValueError):
            build_index([], make_mock())
        dup = _chunks(2) + _chunks(1)
        with pytest.raises(ValueError, match="duplicate"):
            build_index(dup, make_mock())

    def test_embedding_failure_names_chunks(self):
        class FailingBackend:
            cfg = None

            def embed_batch(self, texts):
                raise GatewayError("backend down")

        with pytest.raises(GatewayError, match="f.md#0000"):
            build_index(_chunks(2), FailingBackend(), batch_size=8)


class TestSearch:
    def test_self_similarity_rank_one(self):
        chunks = _chunks(10)
        backend = make_mock()
        index = build_index(chunks, backend)
        query = backend.embed_batch([chunks[3].text])[0]
        results = search(index, query, 3)
        assert results[0].chunk_id == chunks[3].chunk_id
        assert results[0].score == pytest.approx(1.0, abs=1e-6)
        assert results[0].rank == 1

    def test_orthogonal_query_scores_zero(self):
        rng = np.random.default_rng(0)
        index = _random_index(rng, 4, 8)
        # Build a vector orthogonal to all four rows via the null space.
        basis = index.vectors.astype(np.float64)
        _, _, vh = np.linalg.svd(basis)
        query = vh[-1]
        query /= np.linalg.norm(query)
        results = search(index, EmbeddingVector(values=query.astype(np.float32), model_tag="q"), 4)
        for result in results:
            assert result.score == pytest.approx(0.0, abs=1e-6)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            n = int(rng.integers(2, 60))
            d = int(rng.integers(2, 32))
            index = _random_index(rng, n, d, duplicate_rows=int(rng.integers(0, min(3, n))))
            query = rng.standard_normal(d)
            query /= np.linalg.norm(query)
            k = int(rng.integers(1, 12))
            got = search(index, EmbeddingVector(values=query.astype(np.float32), model_tag="q"), k)
            expected = brute_force_search(
                index.chunk_ids, index.file_ids, index.vectors,
                query.astype(np.float32), k
            )
            assert [(r.chunk_id, r.file_id) for r in got] == [(e[0], e[1]) for e in expected]
            for r, e in zip(got, expected):
                assert r.score == pytest.approx(e[2], abs=1e-12)
            assert [r.rank for r in got] == list(range(1, len(got) + 1))

    def test_tie_break_by_chunk_id_total_order(self):
        vec = np.zeros(4, dtype=np.float32)
        vec[0] = 1.0
        rows = np.stack([vec, vec, vec])
        ids = ["c.md#0002", "a.md#0001", "b.md#0003"]
        index = VectorIndex(4, ids, ["c.md", "a.md", "b.md"], rows, "t", "fp")
        results = search(index, vec, 3)
        assert [r.chunk_id for r in results] == ["a.md#0001", "b.md#0003", "c.md#0002"]

    def test_insertion_order_never_changes_output(self):
        rng = np.random.default_rng(7)
        base = _random_index(rng, 30, 8, duplicate_rows=4)
        query = rng.standard_normal(8).astype(np.float32)
        query /= np.linalg.norm(query.astype(np.float64)).astype(np.float32)
        baseline = search(index=base, query_vec=query, k=10)
        permutation = rng.permutation(30)
        permuted = VectorIndex(
            dimension=8,
            chunk_ids=[base.chunk_ids[i] for i in permutation],
            file_ids=[base.file_ids[i] for i in permutation],
            vectors=base.vectors[permutation],
            embedder_tag="random",
            corpus_fingerprint="none",
        )
        shuffled = search(index=permuted, query_vec=query, k=10)
        assert [(r.chunk_id, r.score, r.rank) for r in baseline] == [
            (r.chunk_id, r.score, r.rank) for r in shuffled
        ]

    def test_k_larger_than_index(self):
        index = _random_index(np.random.default_rng(1), 3, 4)
        results = search(index, index.vectors[0], 10)
        assert len(results) == 3

    def test_dimension_mismatch_and_bad_k(self):
        index = _random_index(np.random.default_rng(2), 3, 4)
        with pytest.raises(ValueError, match="dimension"):
            search(index, np.ones(5, dtype=np.float32), 1)
        with pytest.raises(ValueError, match="k must be"):
            search(index, index.vectors[0], 0)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        index = build_index(_chunks(7, file_id="docs/x.md"), make_mock(), batch_size=3)
        path = tmp_path / "store.idx"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.dimension == index.dimension
        assert loaded.chunk_ids == index.chunk_ids
        assert loaded.file_ids == index.file_ids
        assert loaded.embedder_tag == index.embedder_tag
        assert loaded.corpus_fingerprint == index.corpus_fingerprint
        assert np.array_equal(loaded.vectors, index.vectors)  # bit-exact
        assert loaded.vectors.dtype == np.float32

    def test_save_load_save_identical_bytes(self, tmp_path):
        index = build_index(_chunks(4), make_mock())
        first = tmp_path / "a.idx"
        second = tmp_path / "b.idx"
        save_index(index, first)
        save_index(load_index(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_truncated_file_is_corrupt(self, tmp_path):
        index = build_index(_chunks(3), make_mock())
        path = tmp_path / "store.idx"
        save_index(index, path)
        data = path.read_bytes()
        path.write_bytes(data[:-1])
        with pytest.raises(IndexFormatError, match="corrupt index"):
            load_index(path)

    def test_flipped_byte_is_corrupt(self, tmp_path):
        index = build_index(_chunks(3), make_mock())
        path = tmp_path / "store.idx"
        save_index(index, path)
        data = bytearray(path.read_bytes())
        data[len(data) // 2] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(IndexFormatError, match="corrupt index"):
            load_index(path)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "store.idx"
        path.write_bytes(b"NOTANIDX" + b"\x00" * 32)
        with pytest.raises(IndexFormatError, match="not an index file"):
            load_index(path)

    def test_unsupported_version(self, tmp_path):
        import struct
        import zlib

        body = bytearray()
        body += b"RGMINDEX"
        body += struct.pack("<I", 99)
        body += struct.pack("<I", zlib.crc32(bytes(body)))
        path = tmp_path / "store.idx"
        path.write_bytes(bytes(body))
        with pytest.raises(IndexFormatError, match="unsupported index version 99"):
            load_index(path)


class TestAssembleContext:
    def test_empty_results_empty_string(self):
        assert assemble_context([], {}) == ""

    def test_score_formatted_to_four_decimals(self):
        chunks = {"a.md#0000": Chunk("a.md#0000", "a.md", 0, "chunk body")}
        from ragmeter.index import ScoredChunk

        results = [ScoredChunk("a.md#0000", "a.md", 0.70361, 1)]
        context = assemble_context(results, chunks)
        assert context == "[source: a.md | chunk: a.md#0000 | score: 0.7036]\nchunk body"

    def test_blocks_in_rank_order(self):
        from ragmeter.index import ScoredChunk

        chunks = {
            f"a.md#{i:04d}": Chunk(f"a.md#{i:04d}", "a.md", i, f"text {i}") for i in range(3)
        }
        results = [
            ScoredChunk("a.md#0002", "a.md", 0.9, 1),
            ScoredChunk("a.md#0000", "a.md", 0.5, 2),
            ScoredChunk("a.md#0001", "a.md", 0.1, 3),
        ]
        blocks = assemble_context(results, chunks).split("\n\n")
        assert [b.splitlines()[1] for b in blocks] == ["text 2", "text 0", "text 1"]

    def test_unresolvable_id_raises(self):
        from ragmeter.index import ScoredChunk

        with pytest.raises(KeyError, match="missing.md#0000"):
            assemble_context([ScoredChunk("missing.md#0000", "missing.md", 0.5, 1)], {})
