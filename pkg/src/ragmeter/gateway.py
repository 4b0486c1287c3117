"""Backend clients for embeddings, generation, and judging.

Two backend kinds share one interface: an OpenAI-compatible HTTP client
and a fully deterministic offline mock. The gateway L2-normalizes every
embedding, so cosine similarity downstream is a plain dot product.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from . import prompts

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-6

BACKEND_KINDS = ("http_openai_compatible", "mock")


class GatewayError(Exception):
    """Base class for backend failures."""


class TransportError(GatewayError):
    """Connection failure, timeout, or HTTP error after retries."""


class MalformedResponseError(GatewayError):
    """Response body did not match the expected shape."""


class EmptyResponseError(GatewayError):
    """Backend returned an empty completion."""


class NoFixtureError(GatewayError):
    """Mock backend has no fixture for the requested prompt."""


class EmbeddingBatchError(GatewayError):
    """Embedding request failed; carries the indices that were not embedded."""

    def __init__(self, message: str, failed_indices: list[int]):
        super().__init__(message)
        self.failed_indices = failed_indices


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray  # float32, unit L2 norm
    model_tag: str

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.system_prompt or not self.user_prompt:
            raise ValueError("chat prompts must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    model_name: str
    base_url: str | None = None
    api_key_env: str | None = None
    timeout_s: float = 60.0
    max_retries: int = 2
    request_parallelism: int = 4
    # mock-only knobs
    seed: int = 0
    dimension: int = 64
    fixtures_path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http_openai_compatible" and not self.base_url:
            raise ValueError("base_url is required for http_openai_compatible backends")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.request_parallelism < 1:
            raise ValueError("request_parallelism must be >= 1")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")


def fixture_key(text: str) -> str:
    """Stable key for fixture lookup: sha256 of the UTF-8 text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def normalize_embedding(values) -> np.ndarray:
    """Validate and L2-normalize one raw embedding to float32."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] == 0:
        raise GatewayError("embedding must be a non-empty 1-d vector")
    if not np.all(np.isfinite(vec)):
        raise GatewayError("embedding contains NaN or Inf")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise GatewayError("embedding has zero norm")
    return (vec / norm).astype(np.float32)


def _validate_texts(texts: list[str]) -> None:
    if not texts:
        raise ValueError("texts must be non-empty")
    for i, text in enumerate(texts):
        if not text:
            raise ValueError(f"text at index {i} is empty")


class Backend:
    """Common surface of all backends."""

    cfg: BackendConfig

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        raise NotImplementedError

    def chat(self, req: ChatRequest) -> str:
        raise NotImplementedError

    def judge(self, prompt: str) -> str:
        """Chat with temperature pinned to 0 for reproducible verdicts."""
        req = ChatRequest(
            system_prompt=prompts.load_text("judge_system"),
            user_prompt=prompt,
            temperature=0.0,
        )
        return self.chat(req)


class MockBackend(Backend):
    """Deterministic offline backend.

    Embeddings come from a fixture table when one matches the text, else
    from seeded feature hashing of character n-grams (n=1..3). Chat and
    judge replay fixtures keyed by the sha256 of the user prompt; an
    unmatched prompt is an error, never fabricated output.
    """

    def __init__(self, cfg: BackendConfig):
        self.cfg = cfg
        self.chat_fixtures: dict[str, str] = {}
        self.embedding_fixtures: dict[str, list[float]] = {}
        self._cache: dict[str, np.ndarray] = {}
        if cfg.fixtures_path:
            self.load_fixtures(cfg.fixtures_path)

    # -- fixture management -------------------------------------------------

    def add_chat_fixture(self, prompt: str, response: str) -> None:
        self.chat_fixtures[fixture_key(prompt)] = response

    def add_embedding_fixture(self, text: str, values: list[float]) -> None:
        self.embedding_fixtures[fixture_key(text)] = list(values)
        self._cache.pop(text, None)

    def load_fixtures(self, path: str | Path) -> None:
        """Merge fixtures from a JSON file.

        Accepts hashed sections ("chat", "embeddings" keyed by sha256) and
        plaintext sections ("chat_prompts", "embedding_texts" keyed by the
        prompt/text itself).
        """
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise GatewayError(f"cannot load fixtures from {path}: {exc}") from exc
        self.chat_fixtures.update(data.get("chat", {}))
        self.embedding_fixtures.update(data.get("embeddings", {}))
        for prompt, response in data.get("chat_prompts", {}).items():
            self.add_chat_fixture(prompt, response)
        for text, values in data.get("embedding_texts", {}).items():
            self.add_embedding_fixture(text, values)

    def save_fixtures(self, path: str | Path, *, chat_prompts: dict[str, str] | None = None,
                      embedding_texts: dict[str, list[float]] | None = None) -> None:
        """Write a fixture file; hashed sections reflect current state."""
        payload: dict = {
            "chat": dict(sorted(self.chat_fixtures.items())),
            "embeddings": dict(sorted(self.embedding_fixtures.items())),
        }
        if chat_prompts:
            payload["chat_prompts"] = chat_prompts
        if embedding_texts:
            payload["embedding_texts"] = embedding_texts
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    # -- backend surface ----------------------------------------------------

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        _validate_texts(texts)
        return [
            EmbeddingVector(values=self._embed_one(t), model_tag=self.cfg.model_name)
            for t in texts
        ]

    def _embed_one(self, text: str) -> np.ndarray:
        key = fixture_key(text)
        if key in self.embedding_fixtures:
            return normalize_embedding(self.embedding_fixtures[key])
        cached = self._cache.get(text)
        if cached is None:
            cached = normalize_embedding(
                hash_projection(text, seed=self.cfg.seed, dimension=self.cfg.dimension)
            )
            self._cache[text] = cached
        return cached.copy()

    def chat(self, req: ChatRequest) -> str:
        key = fixture_key(req.user_prompt)
        if key not in self.chat_fixtures:
            raise NoFixtureError(
                f"no chat fixture for prompt hash {key[:12]} "
                f"(prompt starts: {req.user_prompt[:80]!r})"
            )
        response = self.chat_fixtures[key]
        if not response.strip():
            raise EmptyResponseError("fixture response is empty")
        return response


def hash_projection(text: str, *, seed: int, dimension: int) -> np.ndarray:
    """Feature-hash character n-grams (n=1..3) onto a signed vector.

    Pure function of (text, seed, dimension): each n-gram is hashed with
    keyed blake2b; the low bit picks the sign, the rest picks the bucket.
    """
    seed_key = seed.to_bytes(8, "little", signed=True)
    vec = np.zeros(dimension, dtype=np.float64)
    for n in (1, 2, 3):
        for i in range(len(text) - n + 1):
            gram = text[i : i + n].encode("utf-8")
            digest = hashlib.blake2b(gram, digest_size=8, key=seed_key).digest()
            h = int.from_bytes(digest, "little")
            sign = 1.0 if h & 1 == 0 else -1.0
            vec[(h >> 1) % dimension] += sign
    if not vec.any():
        vec[0] = 1.0  # degenerate cancellation; keep the vector usable
    return vec


class HttpBackend(Backend):
    """OpenAI-compatible HTTP client (/v1/embeddings, /v1/chat/completions).

    Retries transport failures and 5xx/429 responses with exponential
    backoff (base 1s, doubling); attempts = max_retries + 1. In-flight
    requests are bounded by cfg.request_parallelism.
    """

    def __init__(self, cfg: BackendConfig, *, sleep=time.sleep, backoff_base_s: float = 1.0):
        self.cfg = cfg
        self._sleep = sleep
        self._backoff_base_s = backoff_base_s
        self._semaphore = threading.BoundedSemaphore(cfg.request_parallelism)
        self._api_key = os.environ.get(cfg.api_key_env) if cfg.api_key_env else None

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def _post(self, route: str, payload: dict) -> dict:
        url = self.cfg.base_url.rstrip("/") + route
        attempts = self.cfg.max_retries + 1
        failure = "unreachable"
        for attempt in range(attempts):
            if attempt:
                self._sleep(self._backoff_base_s * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    response = requests.post(
                        url, json=payload, headers=self._headers(), timeout=self.cfg.timeout_s
                    )
            except requests.Timeout:
                failure = f"timeout after {self.cfg.timeout_s}s"
                continue
            except requests.RequestException as exc:
                failure = f"connection error: {exc}"
                continue
            if response.status_code == 429 or response.status_code >= 500:
                failure = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"HTTP {response.status_code} from {url}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise MalformedResponseError(f"invalid JSON from {url}: {exc}") from exc
        raise TransportError(f"{failure} from {url} after {attempts} attempts")

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        _validate_texts(texts)
        payload = {"model": self.cfg.model_name, "input": texts}
        try:
            body = self._post("/v1/embeddings", payload)
        except TransportError as exc:
            raise EmbeddingBatchError(str(exc), failed_indices=list(range(len(texts)))) from exc
        try:
            data = sorted(body["data"], key=lambda item: item["index"])
            raw = [item["embedding"] for item in data]
        except (KeyError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected embeddings response shape: {exc}") from exc
        if len(raw) != len(texts):
            raise MalformedResponseError(
                f"embeddings response has {len(raw)} vectors for {len(texts)} inputs"
            )
        vectors = [
            EmbeddingVector(values=normalize_embedding(v), model_tag=self.cfg.model_name)
            for v in raw
        ]
        dims = {v.dimension for v in vectors}
        if len(dims) > 1:
            raise GatewayError(f"dimension mismatch across batch: {sorted(dims)}")
        return vectors

    def chat(self, req: ChatRequest) -> str:
        payload = {
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        body = self._post("/v1/chat/completions", payload)
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected chat response shape: {exc}") from exc
        if not isinstance(content, str) or not content.strip():
            raise EmptyResponseError("backend returned an empty completion")
        return content


def make_backend(cfg: BackendConfig) -> Backend:
    if cfg.kind == "mock":
        return MockBackend(cfg)
    return HttpBackend(cfg)


def embed_batch(texts: list[str], cfg: BackendConfig) -> list[EmbeddingVector]:
    return make_backend(cfg).embed_batch(texts)


def chat(req: ChatRequest, cfg: BackendConfig) -> str:
    return make_backend(cfg).chat(req)


def judge(prompt: str, cfg: BackendConfig) -> str:
    return make_backend(cfg).judge(prompt)
