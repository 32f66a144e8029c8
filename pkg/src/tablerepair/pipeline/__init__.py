"""Extraction and repair flows against pluggable model backends."""

from .backends import (
    Backend,
    BackendSpec,
    Completion,
    complete,
    make_backend,
    parse_inline_backend,
    write_replay,
)
from .corpus import build_repair_corpus, iter_repair_corpus
from .prompts import PromptPair, render_prompt
from .runner import MODES, Prediction, extract_table_text, run_batch, run_task
from .splits import contribution_table, format_contribution_table, split_tasks

__all__ = [
    "Backend",
    "BackendSpec",
    "Completion",
    "MODES",
    "Prediction",
    "PromptPair",
    "build_repair_corpus",
    "complete",
    "contribution_table",
    "extract_table_text",
    "format_contribution_table",
    "iter_repair_corpus",
    "make_backend",
    "parse_inline_backend",
    "render_prompt",
    "run_batch",
    "run_task",
    "split_tasks",
    "write_replay",
]
