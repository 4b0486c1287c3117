"""Prompt templates, shipped as editable text files.

Templates use string.Template placeholders ($question, $answer, ...) so
files can contain braces, JSON, or Khmer text without escaping. A custom
template directory can shadow the packaged defaults file by file.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from string import Template

TEMPLATE_NAMES = (
    "statement_decomposition",
    "statement_verdict",
    "reverse_question",
    "factual_classification",
    "judge_system",
    "generation_system",
    "generation_user",
)


def load_text(name: str, template_dir: str | Path | None = None) -> str:
    """Return the raw template text for name (without extension)."""
    filename = f"{name}.txt"
    if template_dir is not None:
        candidate = Path(template_dir) / filename
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    packaged = resources.files(__package__) / filename
    if not packaged.is_file():
        raise KeyError(f"unknown prompt template: {name!r}")
    return packaged.read_text(encoding="utf-8")


def load_template(name: str, template_dir: str | Path | None = None) -> Template:
    return Template(load_text(name, template_dir))
