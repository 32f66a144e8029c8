"""Repair-training corpus: extractor outputs paired with the ground truth."""

from __future__ import annotations

import os
from collections import Counter
from pathlib import Path
from typing import Iterable, Iterator, Optional

from ..errors import BackendError, TableError
from ..table_model import check_validity, parse_table
from ..tasks import Task, dumps
from .backends import Backend, BackendSpec, make_backend
from .prompts import render_prompt
from .runner import DEFAULT_MAX_RESPONSE_CHARS, extract_table_text, ordered_map


def _extract(backend: Backend, task: Task, threshold: float, limit: int):
    try:
        out = backend.complete(render_prompt("explicitation", task.raw_text), task.id).text
    except BackendError as exc:
        return None, type(exc).__name__
    if len(out) > limit:
        return None, "Oversize"
    try:
        broken = extract_table_text(out)
    except TableError as exc:
        return None, type(exc).__name__
    truth = parse_table(task.ground_truth_html, collapse_whitespace=True)
    verdict = check_validity(broken, truth, threshold)
    if not verdict.quality_pass:
        return None, verdict.reason
    return broken, "ok"


def repair_record(task: Task, broken_html: str) -> dict:
    prompt = render_prompt("repair", task.raw_text, broken_html)
    return {
        "id": task.id,
        "raw_text": task.raw_text,
        "broken_html": broken_html,
        "ground_truth_html": task.ground_truth_html,
        "messages": prompt.messages(),
        "target": task.ground_truth_html,
    }


def iter_repair_corpus(
    tasks: Iterable[Task],
    extractor: BackendSpec | Backend,
    filter_threshold: float = 0.5,
    summary: Optional[dict] = None,
    *,
    concurrency: int = 1,
    max_response_chars: int = DEFAULT_MAX_RESPONSE_CHARS,
) -> Iterator[dict]:
    """Yield repair examples in task order, updating ``summary`` counts as it goes.

    A task is dropped when the extraction fails, is not a well-formed table,
    or scores below ``filter_threshold`` TEDS against the ground truth.
    """
    backend = make_backend(extractor)
    if summary is None:
        summary = {}
    summary.setdefault("kept", 0)
    summary.setdefault("dropped", 0)
    reasons = Counter(summary.get("drop_reasons", {}))

    def job(task):
        return task, _extract(backend, task, filter_threshold, max_response_chars)

    for task, (broken, reason) in ordered_map(job, tasks, concurrency):
        if broken is None:
            summary["dropped"] += 1
            reasons[reason] += 1
            summary["drop_reasons"] = dict(sorted(reasons.items()))
            continue
        summary["kept"] += 1
        yield repair_record(task, broken)
    summary["drop_reasons"] = dict(sorted(reasons.items()))


def build_repair_corpus(
    tasks: Iterable[Task],
    extractor: BackendSpec | Backend,
    filter_threshold: float = 0.5,
    out_path: str | os.PathLike | None = None,
    *,
    concurrency: int = 1,
    max_response_chars: int = DEFAULT_MAX_RESPONSE_CHARS,
) -> tuple[list[dict], dict]:
    """Build the corpus; with ``out_path`` records are streamed to disk and not kept."""
    summary: dict = {}
    records = iter_repair_corpus(
        tasks,
        extractor,
        filter_threshold,
        summary,
        concurrency=concurrency,
        max_response_chars=max_response_chars,
    )
    if out_path is None:
        return list(records), summary
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")
    return [], summary
