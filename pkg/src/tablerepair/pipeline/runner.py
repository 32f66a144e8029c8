"""Extract / repair flows for single tasks and resumable batch runs."""

from __future__ import annotations

import json
import logging
import os
import re
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Literal, Optional

from ..errors import BackendError, ConfigError, NoTableFound, TableError, UnbalancedMarkup
from ..table_model import TableTree, ValidityVerdict, check_validity, parse_table
from ..tasks import Task, dumps
from .backends import Backend, BackendSpec, make_backend
from .prompts import render_prompt

log = logging.getLogger(__name__)

Mode = Literal["extract_only", "sd", "lift", "eeft"]
MODES = ("extract_only", "sd", "lift", "eeft")
REPAIR_MODES = ("sd", "lift")

DEFAULT_MAX_RESPONSE_CHARS = 200_000

_TABLE_TAG = re.compile(r"<(/?)table(?=[\s>/])[^>]*>", re.IGNORECASE)


def normalize_mode(mode: str) -> str:
    m = mode.replace("-", "_").lower()
    if m not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    return m


def extract_table_text(model_output: str) -> str:
    """Substring from the first ``<table`` to its matching ``</table>``.

    Code fences and chatter around the table are dropped; nested tables are
    kept inside their parent.
    """
    depth = 0
    start = None
    for m in _TABLE_TAG.finditer(model_output):
        closing = m.group(1) == "/"
        if start is None:
            if closing:
                continue
            start = m.start()
        depth += -1 if closing else 1
        if depth == 0:
            return model_output[start : m.end()]
    if start is None:
        raise NoTableFound("model output contains no <table>")
    raise UnbalancedMarkup("model output has an unterminated <table>")


@dataclass(frozen=True)
class Prediction:
    task_id: str
    mode: str
    extractor_output: Optional[str]
    final_output: str
    verdict: ValidityVerdict
    latency: float
    backend_calls: int
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "mode": self.mode,
            "extractor_output": self.extractor_output,
            "final_output": self.final_output,
            "verdict": self.verdict.to_dict(),
            "latency": round(self.latency, 6),
            "backend_calls": self.backend_calls,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Prediction":
        return cls(
            d["task_id"],
            d["mode"],
            d.get("extractor_output"),
            d["final_output"],
            ValidityVerdict.from_dict(d["verdict"]),
            d.get("latency", 0.0),
            d["backend_calls"],
            d.get("error"),
        )


def check_backends(mode: str, extractor, repairer) -> str:
    mode = normalize_mode(mode)
    if extractor is None:
        raise ConfigError(f"mode {mode} needs an extractor backend")
    if mode in REPAIR_MODES and repairer is None:
        raise ConfigError(f"mode {mode} needs a repairer backend")
    return mode


def _isolate(text: str, limit: int) -> tuple[str, bool]:
    oversize = len(text) > limit
    if oversize:
        text = text[:limit]
    try:
        return extract_table_text(text), oversize
    except TableError:
        return text, oversize


def run_task(
    task: Task,
    mode: str,
    extractor: BackendSpec | Backend,
    repairer: BackendSpec | Backend | None = None,
    *,
    threshold: float = 0.5,
    max_repair_rounds: int = 1,
    max_response_chars: int = DEFAULT_MAX_RESPONSE_CHARS,
    truth: Optional[TableTree] = None,
) -> Prediction:
    """Run one task through the chosen flow.

    ``extract_only`` and ``eeft`` make one explicitation call (``eeft`` simply
    points the extractor at an end-to-end fine-tuned model).  ``sd`` and
    ``lift`` follow it with a repair call on ``repairer``, a base model for
    self-debug or a repair-tuned model for last-mile fine-tuning.  Extra repair
    rounds (``max_repair_rounds > 1``) run only while the output is still not a
    well-formed table.  Backend failures end up in the prediction's ``error``.
    """
    mode = check_backends(mode, extractor, repairer)
    if max_repair_rounds < 1:
        raise ConfigError("max_repair_rounds must be >= 1")
    ext = make_backend(extractor)
    rep = make_backend(repairer) if repairer is not None else None
    if truth is None and task.ground_truth_html:
        try:
            truth = parse_table(task.ground_truth_html, collapse_whitespace=True)
        except TableError:
            truth = None

    calls = 0
    latency = 0.0
    extracted: Optional[str] = None
    final = ""
    oversize = False
    error = None
    try:
        out = ext.complete(render_prompt("explicitation", task.raw_text), task.id)
        calls += 1
        latency += out.latency
        final, oversize = _isolate(out.text, max_response_chars)
        if mode in REPAIR_MODES:
            extracted = final
            for _ in range(max_repair_rounds):
                out = rep.complete(render_prompt("repair", task.raw_text, final), task.id)
                calls += 1
                latency += out.latency
                final, oversize = _isolate(out.text, max_response_chars)
                if check_validity(final).quality_pass:
                    break
    except BackendError as exc:
        error = f"{type(exc).__name__}: {exc}"

    if error is not None:
        verdict = ValidityVerdict(False, False, "BackendError")
    elif oversize:
        verdict = ValidityVerdict(False, False, "Oversize")
    else:
        verdict = check_validity(final, truth, threshold)
    return Prediction(task.id, mode, extracted, final, verdict, latency, calls, error)


def completed_ids(path: str | os.PathLike, key: str = "task_id") -> set[str]:
    """Ids already present in a JSONL output; a torn trailing line is cut off."""
    p = Path(path)
    if not p.exists():
        return set()
    data = p.read_bytes()
    cut = data.rfind(b"\n") + 1
    if cut != len(data):
        with open(p, "r+b") as fh:
            fh.truncate(cut)
        data = data[:cut]
    return {str(json.loads(line)[key]) for line in data.splitlines() if line.strip()}


def ordered_map(fn: Callable, items: Iterable, concurrency: int) -> Iterator:
    """``map`` over a thread pool yielding results in input order, with at most
    ``4 * concurrency`` items in flight."""
    window: deque = deque()
    with ThreadPoolExecutor(concurrency) as pool:
        for item in items:
            window.append(pool.submit(fn, item))
            if len(window) >= 4 * concurrency:
                yield window.popleft().result()
        while window:
            yield window.popleft().result()


def run_batch(
    tasks: Iterable[Task],
    mode: str,
    extractor: BackendSpec | Backend,
    repairer: BackendSpec | Backend | None,
    out_path: str | os.PathLike,
    *,
    concurrency: int = 4,
    threshold: float = 0.5,
    max_repair_rounds: int = 1,
    max_response_chars: int = DEFAULT_MAX_RESPONSE_CHARS,
    progress: Optional[Callable[[int], None]] = None,
) -> dict[str, int]:
    """Run every task not yet in ``out_path`` and append predictions in input order.

    Records are written in task order whatever the completion order, so an
    interrupted run followed by a rerun yields the same file as one clean run.
    """
    mode = check_backends(mode, extractor, repairer)
    if concurrency < 1:
        raise ConfigError("concurrency must be >= 1")
    ext = make_backend(extractor)
    rep = make_backend(repairer) if repairer is not None else None
    done = completed_ids(out_path)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    stats = {"written": 0, "skipped": 0, "errors": 0}

    def pending():
        for task in tasks:
            if task.id in done:
                stats["skipped"] += 1
                continue
            done.add(task.id)
            yield task

    def job(task: Task) -> Prediction:
        return run_task(
            task,
            mode,
            ext,
            rep,
            threshold=threshold,
            max_repair_rounds=max_repair_rounds,
            max_response_chars=max_response_chars,
        )

    with open(out_path, "a", encoding="utf-8") as fh:
        for pred in ordered_map(job, pending(), concurrency):
            fh.write(dumps(pred.to_dict()) + "\n")
            fh.flush()
            stats["written"] += 1
            stats["errors"] += pred.error is not None
            if progress:
                progress(stats["written"])
    log.info("run finished: %s", stats)
    return stats
