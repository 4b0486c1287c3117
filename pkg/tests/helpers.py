"""Shared test rigs and independent oracles.

The oracles here are deliberately naive (plain Python loops, no calls into
the library's scoring paths) so they stay independent of the code they
check. The fixture-wiring helpers build judge/generator prompts through
the real templates so mock fixtures key on the exact prompts the pipeline
sends.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from ragmeter import prompts
from ragmeter.config import RunConfig
from ragmeter.corpus import (
    Chunk,
    ChunkConfig,
    GoldenEntry,
    chunk_document,
    load_corpus,
    serialize_golden_dataset,
)
from ragmeter.gateway import BackendConfig, MockBackend
from ragmeter.index import assemble_context, build_index, search
from ragmeter.metrics import EvalSample


def mock_cfg(
    model_name: str = "mock-model",
    seed: int = 0,
    dimension: int = 64,
    fixtures_path: str | None = None,
) -> BackendConfig:
    return BackendConfig(
        kind="mock",
        model_name=model_name,
        seed=seed,
        dimension=dimension,
        fixtures_path=fixtures_path,
    )


def make_mock(model_name: str = "mock-model", seed: int = 0, dimension: int = 64) -> MockBackend:
    return MockBackend(mock_cfg(model_name, seed, dimension))


# --- prompt builders (same templates the pipeline uses) ----------------------


def decomposition_prompt(sample: EvalSample) -> str:
    return prompts.load_template("statement_decomposition").substitute(
        question=sample.question, answer=sample.answer
    )


def verdict_prompt(sample: EvalSample, statement: str) -> str:
    return prompts.load_template("statement_verdict").substitute(
        context=sample.context, statement=statement
    )


def reverse_prompt(sample: EvalSample, variant: int, total: int = 3) -> str:
    return prompts.load_template("reverse_question").substitute(
        answer=sample.answer, variant=variant, total=total
    )


def classification_prompt(sample: EvalSample) -> str:
    return prompts.load_template("factual_classification").substitute(
        question=sample.question, answer=sample.answer, ground_truth=sample.ground_truth
    )


def generation_user_prompt(question: str, context: str) -> str:
    return prompts.load_template("generation_user").substitute(
        question=question, context=context
    )


# --- fixture vectors with exact cosines --------------------------------------


def axis_vector(axis: int, dimension: int = 64) -> list[float]:
    values = [0.0] * dimension
    values[axis] = 1.0
    return values


def cosine_vector(target: float, main_axis: int, ortho_axis: int, dimension: int = 64) -> list[float]:
    """Unit vector whose cosine with axis_vector(main_axis) is exactly target."""
    values = [0.0] * dimension
    values[main_axis] = target
    values[ortho_axis] = math.sqrt(1.0 - target * target)
    return values


# --- the recorded single-sample trace rig ------------------------------------

TRACE_TARGETS = {
    "faithfulness": 1.000,
    "answer_relevance": 0.797417,
    "context_relevance": 0.726295,
    "factual_correctness": 0.500,
    "answer_similarity": 0.800418,
    "answer_correctness": 0.650209,
}
TRACE_REVERSE_SIMS = (0.845994, 0.735499, 0.810756)


def build_trace_rig() -> tuple[EvalSample, MockBackend, MockBackend]:
    """Sample plus judge/embedder mocks wired to reproduce the recorded
    single-sample trace: 4 statements all supported, reverse-question
    cosines per TRACE_REVERSE_SIMS, TP=1/FP=2/FN=0, and the two fixed
    similarity values."""
    sample = EvalSample(
        question="Which command restores the router to factory settings?",
        context=(
            "[source: manuals/router.md | chunk: manuals/router.md#0002 | score: 0.7263]\n"
            "Hold the reset button for ten seconds to restore factory settings. "
            "The router restarts twice while the reset completes."
        ),
        answer=(
            "Hold the reset button for ten seconds to restore factory settings. "
            "The router restarts twice during the reset."
        ),
        ground_truth="Press and hold the reset button for ten seconds to restore the factory configuration.",
    )
    judge = make_mock("mock-judge")
    embedder = make_mock("mock-embedder")

    statements = [
        "The reset button restores factory settings.",
        "The button must be held for ten seconds.",
        "The router restarts twice during the reset.",
        "No other action is needed to restore factory settings.",
    ]
    judge.add_chat_fixture(
        decomposition_prompt(sample),
        "\n".join(f"{i}. {s}" for i, s in enumerate(statements, start=1)),
    )
    for statement in statements:
        judge.add_chat_fixture(
            verdict_prompt(sample, statement), "Yes: stated in the context."
        )

    reverse_questions = [
        "How do I restore the router to factory settings?",
        "What is the procedure for a factory reset of the router?",
        "Which button resets the router to its factory state?",
    ]
    for variant, question in enumerate(reverse_questions, start=1):
        judge.add_chat_fixture(reverse_prompt(sample, variant), question)

    judge.add_chat_fixture(
        classification_prompt(sample),
        "TP:\n"
        "1. Holding the reset button for ten seconds restores factory settings.\n"
        "FP:\n"
        "1. The router restarts twice during the reset.\n"
        "2. No other action is needed to restore factory settings.\n"
        "FN:\n"
        "None",
    )

    embedder.add_embedding_fixture(sample.question, axis_vector(0))
    for i, (question, sim) in enumerate(zip(reverse_questions, TRACE_REVERSE_SIMS)):
        embedder.add_embedding_fixture(question, cosine_vector(sim, 0, 1 + i))
    embedder.add_embedding_fixture(
        sample.context, cosine_vector(TRACE_TARGETS["context_relevance"], 0, 4)
    )
    embedder.add_embedding_fixture(sample.answer, axis_vector(5))
    embedder.add_embedding_fixture(
        sample.ground_truth, cosine_vector(TRACE_TARGETS["answer_similarity"], 5, 6)
    )
    return sample, judge, embedder


# --- independent recount oracles ----------------------------------------------


def recount_hit_rate(judgments, k: int) -> float:
    eligible = 0
    hits = 0
    for judgment in judgments:
        if len(judgment.relevant_chunk_ids) == 0:
            continue
        eligible += 1
        found = False
        for scored in list(judgment.ranked)[:k]:
            if scored.chunk_id in judgment.relevant_chunk_ids:
                found = True
        if found:
            hits += 1
    return hits / eligible


def recount_file_hit_rate(judgments, k: int) -> float:
    hits = 0
    for judgment in judgments:
        found = False
        for scored in list(judgment.ranked)[:k]:
            if scored.file_id in judgment.relevant_file_ids:
                found = True
        if found:
            hits += 1
    return hits / len(judgments)


def recount_mrr(judgments, k: int) -> float:
    eligible = 0
    total = 0.0
    for judgment in judgments:
        if len(judgment.relevant_chunk_ids) == 0:
            continue
        eligible += 1
        best = 0.0
        position = 0
        for scored in list(judgment.ranked)[:k]:
            position += 1
            if scored.chunk_id in judgment.relevant_chunk_ids:
                best = 1.0 / position
                break
        total += best
    return total / eligible


def recount_precision(judgments, k: int) -> float:
    eligible = 0
    total = 0.0
    for judgment in judgments:
        if len(judgment.relevant_chunk_ids) == 0:
            continue
        eligible += 1
        relevant = 0
        for scored in list(judgment.ranked)[:k]:
            if scored.chunk_id in judgment.relevant_chunk_ids:
                relevant += 1
        total += relevant / k
    return total / eligible


def recount_mean_top1(judgments) -> float:
    total = 0.0
    for judgment in judgments:
        total += judgment.ranked[0].score
    return total / len(judgments)


def brute_force_search(chunk_ids, file_ids, vectors, query, k: int):
    """Exhaustive ranking oracle: per-row float64 dot, full sort with the
    (-score, chunk_id) tie-break, truncate to k."""
    query64 = np.asarray(query, dtype=np.float64)
    scored = []
    for i in range(len(chunk_ids)):
        score = float(np.dot(np.asarray(vectors[i], dtype=np.float64), query64))
        scored.append((chunk_ids[i], file_ids[i], score))
    scored.sort(key=lambda item: (-item[2], item[0]))
    return scored[:k]


# --- synthetic judgment sets ---------------------------------------------------


def random_judgments(rng: np.random.Generator, n_questions: int, fully_labeled: bool = True):
    """Synthetic RetrievalJudgment sets with 10 ranked results each."""
    from ragmeter.index import ScoredChunk
    from ragmeter.retrieval import RetrievalJudgment

    n_files = 6
    chunks_per_file = 8
    pool = [
        (f"f{f}.md#{o:04d}", f"f{f}.md") for f in range(n_files) for o in range(chunks_per_file)
    ]
    judgments = []
    for q in range(n_questions):
        picks = rng.choice(len(pool), size=10, replace=False)
        scores = np.sort(rng.uniform(-1.0, 1.0, size=10))[::-1]
        ranked = tuple(
            ScoredChunk(
                chunk_id=pool[int(p)][0],
                file_id=pool[int(p)][1],
                score=float(s),
                rank=r,
            )
            for r, (p, s) in enumerate(zip(picks, scores), start=1)
        )
        if fully_labeled:
            n_relevant = int(rng.integers(1, 4))
        else:
            n_relevant = int(rng.integers(0, 4))
        relevant_picks = rng.choice(len(pool), size=n_relevant, replace=False)
        relevant_chunks = frozenset(pool[int(p)][0] for p in relevant_picks)
        relevant_files = frozenset(pool[int(p)][1] for p in relevant_picks)
        if not relevant_files:
            relevant_files = frozenset({pool[int(rng.integers(0, len(pool)))][1]})
        judgments.append(
            RetrievalJudgment(
                question_id=f"q{q:03d}",
                ranked=ranked,
                relevant_chunk_ids=relevant_chunks,
                relevant_file_ids=relevant_files,
            )
        )
    return judgments


# --- full mock generation run wiring -------------------------------------------


def wire_generation_run(
    base_dir: Path,
    n_questions: int = 20,
    n_docs: int = 5,
    k: int = 3,
    parallelism: int = 1,
    generator_tag: str = "mock-generator",
    output_subdir: str = "out",
) -> RunConfig:
    """Build a corpus, golden set, and fully-fixtured mock run config.

    Every judge and generator prompt the pipeline will send is registered
    in fixture files, so the run is replayable bit for bit.
    """
    corpus_dir = base_dir / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for d in range(n_docs):
        paragraphs = [f"# Topic {d}"]
        for p in range(4):
            paragraphs.append(
                f"Document {d} paragraph {p} explains rule {d}-{p} about "
                f"service level {p}. It also lists clause {d * 10 + p}."
            )
        (corpus_dir / f"doc{d}.md").write_text("\n\n".join(paragraphs), encoding="utf-8")

    chunking = ChunkConfig(max_chars=220, min_chars=40)
    documents = load_corpus(corpus_dir)
    chunks: list[Chunk] = []
    for doc in documents:
        chunks.extend(chunk_document(doc, chunking))
    chunks_by_id = {c.chunk_id: c for c in chunks}
    chunks_by_file: dict[str, list[Chunk]] = {}
    for chunk in chunks:
        chunks_by_file.setdefault(chunk.file_id, []).append(chunk)

    embedder_cfg = mock_cfg("mock-embedder")
    embedder = MockBackend(embedder_cfg)
    index = build_index(chunks, embedder)

    entries = []
    for i in range(n_questions):
        file_id = documents[i % n_docs].file_id
        gold_chunk = chunks_by_file[file_id][i % len(chunks_by_file[file_id])]
        entries.append(
            GoldenEntry(
                question_id=f"q{i:03d}",
                question=f"What does rule {i % n_docs}-{i % 4} require for question {i}?",
                ground_truth=f"Rule {i % n_docs}-{i % 4} requires step {i} and clause {i + 100}.",
                relevant_chunk_ids=frozenset({gold_chunk.chunk_id}),
                relevant_file_ids=frozenset({file_id}),
                domain_category=f"domain-{i % 3}",
            )
        )
    golden_path = base_dir / "golden.jsonl"
    serialize_golden_dataset(entries, golden_path)

    generator = MockBackend(mock_cfg(generator_tag))
    judge = MockBackend(mock_cfg("mock-judge"))
    for i, entry in enumerate(entries):
        query_vec = embedder.embed_batch([entry.question])[0]
        ranked = search(index, query_vec, k)
        context = assemble_context(ranked, chunks_by_id)
        answer = (
            f"Rule {i % n_docs}-{i % 4} requires step {i}. "
            f"It also depends on clause {i + 100}."
        )
        generator.add_chat_fixture(generation_user_prompt(entry.question, context), answer)

        sample = EvalSample(
            question=entry.question,
            context=context,
            answer=answer,
            ground_truth=entry.ground_truth,
        )
        statements = [
            f"Rule {i % n_docs}-{i % 4} requires step {i}.",
            f"The rule depends on clause {i + 100}.",
        ]
        judge.add_chat_fixture(
            decomposition_prompt(sample),
            "\n".join(f"{n}. {s}" for n, s in enumerate(statements, start=1)),
        )
        verdict_pattern = [("Yes", "Yes"), ("Yes", "No"), ("No", "No")][i % 3]
        for statement, verdict in zip(statements, verdict_pattern):
            judge.add_chat_fixture(
                verdict_prompt(sample, statement), f"{verdict}: checked against context."
            )
        for variant in range(1, 4):
            judge.add_chat_fixture(
                reverse_prompt(sample, variant),
                f"What does rule {i % n_docs}-{i % 4} require? (variant {variant})",
            )
        tp = [f"Step {i} is required by the rule."]
        fp = [f"Clause {i + 100} claim {j} is extra." for j in range(i % 3)]
        fn = [f"Missing detail {j} from the reference." for j in range((i + 1) % 2)]
        lines = ["TP:"] + [f"{n}. {s}" for n, s in enumerate(tp, 1)]
        lines += ["FP:"] + ([f"{n}. {s}" for n, s in enumerate(fp, 1)] or ["None"])
        lines += ["FN:"] + ([f"{n}. {s}" for n, s in enumerate(fn, 1)] or ["None"])
        judge.add_chat_fixture(classification_prompt(sample), "\n".join(lines))

    generator_fixtures = base_dir / "generator_fixtures.json"
    judge_fixtures = base_dir / "judge_fixtures.json"
    generator.save_fixtures(generator_fixtures)
    judge.save_fixtures(judge_fixtures)

    return RunConfig(
        corpus_path=corpus_dir,
        golden_path=golden_path,
        index_path=base_dir / "chunks.index",
        output_dir=base_dir / output_subdir,
        k=k,
        parallelism=parallelism,
        chunking=chunking,
        embedder=embedder_cfg,
        generator=mock_cfg(generator_tag, fixtures_path=str(generator_fixtures)),
        judge=mock_cfg("mock-judge", fixtures_path=str(judge_fixtures)),
    )


def config_to_yaml(cfg: RunConfig, path: Path) -> Path:
    """Write a RunConfig as the YAML tree the CLI consumes."""

    def backend_dict(backend: BackendConfig | None) -> dict | None:
        if backend is None:
            return None
        data = {"kind": backend.kind, "model_name": backend.model_name}
        if backend.base_url is not None:
            data["base_url"] = backend.base_url
        if backend.api_key_env is not None:
            data["api_key_env"] = backend.api_key_env
        if backend.kind == "mock":
            data["seed"] = backend.seed
            data["dimension"] = backend.dimension
            if backend.fixtures_path is not None:
                data["fixtures_path"] = str(backend.fixtures_path)
        return data

    data = {
        "corpus_path": str(cfg.corpus_path) if cfg.corpus_path else None,
        "golden_path": str(cfg.golden_path) if cfg.golden_path else None,
        "index_path": str(cfg.index_path) if cfg.index_path else None,
        "output_dir": str(cfg.output_dir),
        "k": cfg.k,
        "parallelism": cfg.parallelism,
        "seed": cfg.seed,
        "chunking": {
            "max_chars": cfg.chunking.max_chars,
            "min_chars": cfg.chunking.min_chars,
            "overlap_chars": cfg.chunking.overlap_chars,
        },
        "embedder": backend_dict(cfg.embedder),
        "generator": backend_dict(cfg.generator),
        "judge": backend_dict(cfg.judge),
    }
    data = {k: v for k, v in data.items() if v is not None}
    path.write_text(yaml.safe_dump(data, sort_keys=True), encoding="utf-8")
    return path
