"""ragmeter: evaluation toolkit for retrieval-augmented generation pipelines."""

from .config import ConfigError, RunConfig, apply_overrides, load_config
from .corpus import (
    Chunk,
    ChunkConfig,
    CorpusError,
    Document,
    GoldenEntry,
    chunk_document,
    load_corpus,
    parse_golden_dataset,
    serialize_golden_dataset,
)
from .gateway import (
    Backend,
    BackendConfig,
    ChatRequest,
    EmbeddingVector,
    GatewayError,
    MockBackend,
    embed_batch,
    make_backend,
)
from .index import (
    ScoredChunk,
    VectorIndex,
    assemble_context,
    build_index,
    load_index,
    save_index,
    search,
)
from .metrics import (
    EvalSample,
    MetricBundle,
    MetricConfig,
    answer_correctness,
    answer_relevance,
    answer_similarity,
    context_relevance,
    decompose_statements,
    evaluate_sample,
    factual_correctness,
    faithfulness,
)
from .retrieval import (
    RetrievalJudgment,
    RetrievalReport,
    build_retrieval_report,
    file_hit_rate_at_k,
    hit_rate_at_k,
    mean_top1_cosine,
    mrr_at_k,
    precision_at_k,
)
from .runner import (
    EvaluationRecord,
    MetricReport,
    build_metric_report,
    emit_report,
    run_generation_eval,
    run_retrieval_eval,
)

__version__ = "0.1.0"
