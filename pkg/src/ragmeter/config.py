"""Run configuration: YAML file loading, flag overrides, validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml

from .corpus import ChunkConfig
from .gateway import BackendConfig


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


@dataclass(frozen=True)
class RunConfig:
    corpus_path: Path | None = None
    golden_path: Path | None = None
    index_path: Path | None = None
    output_dir: Path = Path("ragmeter-out")
    k: int = 3
    parallelism: int = 1
    seed: int = 0
    embed_batch_size: int = 64
    generation_temperature: float = 0.0
    generation_max_tokens: int = 1024
    n_reverse_questions: int = 3
    weight_factual: float = 0.5
    weight_similarity: float = 0.5
    system_prompt_path: Path | None = None
    template_dir: Path | None = None
    embedder: BackendConfig | None = None
    generator: BackendConfig | None = None
    judge: BackendConfig | None = None
    chunking: ChunkConfig = ChunkConfig()

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.embed_batch_size < 1:
            raise ConfigError("embed_batch_size must be >= 1")
        if self.weight_factual < 0 or self.weight_similarity < 0:
            raise ConfigError("metric weights must be non-negative")
        if abs(self.weight_factual + self.weight_similarity - 1.0) > 1e-9:
            raise ConfigError(
                "metric weights must sum to 1, got "
                f"{self.weight_factual} + {self.weight_similarity}"
            )

    def require(self, *names: str) -> None:
        """Raise ConfigError naming the first unset field among names."""
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"missing required config field: {name}")


_PATH_FIELDS = (
    "corpus_path",
    "golden_path",
    "index_path",
    "output_dir",
    "system_prompt_path",
    "template_dir",
)
_BACKEND_FIELDS = ("embedder", "generator", "judge")
_SCALAR_FIELDS = (
    "k",
    "parallelism",
    "seed",
    "embed_batch_size",
    "generation_temperature",
    "generation_max_tokens",
    "n_reverse_questions",
    "weight_factual",
    "weight_similarity",
)


def _backend_from_dict(data: dict, where: str) -> BackendConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    valid = {f.name for f in dataclasses.fields(BackendConfig)}
    unknown = sorted(set(data) - valid)
    if unknown:
        raise ConfigError(f"{where}: unknown keys: {', '.join(unknown)}")
    try:
        return BackendConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _chunking_from_dict(data: dict) -> ChunkConfig:
    if not isinstance(data, dict):
        raise ConfigError("chunking: expected a mapping")
    valid = {f.name for f in dataclasses.fields(ChunkConfig)}
    unknown = sorted(set(data) - valid)
    if unknown:
        raise ConfigError(f"chunking: unknown keys: {', '.join(unknown)}")
    try:
        return ChunkConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"chunking: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    """Load a YAML config file into a RunConfig."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    known = set(_PATH_FIELDS) | set(_BACKEND_FIELDS) | set(_SCALAR_FIELDS) | {"chunking"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(unknown)}")
    kwargs: dict = {}
    for name in _PATH_FIELDS:
        if raw.get(name) is not None:
            kwargs[name] = Path(raw[name])
    for name in _SCALAR_FIELDS:
        if raw.get(name) is not None:
            kwargs[name] = raw[name]
    for name in _BACKEND_FIELDS:
        if raw.get(name) is not None:
            kwargs[name] = _backend_from_dict(raw[name], name)
    if raw.get("chunking") is not None:
        kwargs["chunking"] = _chunking_from_dict(raw["chunking"])
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Replace fields with non-None override values (flags beat the file)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return cfg
    try:
        return dataclasses.replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
