"""Alternate input formats for robustness runs, and a plain-text clipboard stand-in.

``flatten_clipboard`` only approximates what a PDF viewer puts on the
clipboard (cell texts in reading order, no structure); real captured text can
be supplied instead wherever a task's ``raw_text`` is used.
"""

from __future__ import annotations

import json
import random
import re
import string
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import HasSpans, NoHeader, TableError
from .table_model import TableGrid, TableTree, parse_table, to_grid
from .tasks import Task

SEPARATORS = (",", "\t", "|", "^")
_NEEDS_QUOTES = re.compile(r'[,\t|^"\n\r]')
_DUP_SUFFIX = "#{}"


@dataclass(frozen=True)
class PerturbConfig:
    seed: int = 0
    separator_flip_probability: float = 0.3
    junk_line_probability: float = 0.5

    def __post_init__(self) -> None:
        for name in ("separator_flip_probability", "junk_line_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")


def flatten_clipboard(tree: TableTree) -> str:
    """One line per grid row, anchor-cell texts joined by single spaces."""
    grid = to_grid(tree)
    lines = []
    for row in grid.cells:
        words = [c.text for c in row if c.is_anchor and c.text]
        if words:
            lines.append(" ".join(words))
    return "\n".join(lines)


def _csv_field(text: str) -> str:
    if _NEEDS_QUOTES.search(text):
        return '"' + text.replace('"', '""') + '"'
    return text


def _junk_line(rng: random.Random) -> str:
    alphabet = string.ascii_letters + string.digits
    n_tokens = rng.randint(2, 5)
    return " ".join(
        "".join(rng.choice(alphabet) for _ in range(rng.randint(3, 8))) for _ in range(n_tokens)
    )


def _require_no_spans(grid: TableGrid) -> None:
    if grid.has_spans():
        raise HasSpans("table has spanning cells")


def make_noisy_csv(grid: TableGrid, cfg: PerturbConfig = PerturbConfig()) -> str:
    """Comma-separated rows with randomly swapped separators and optional junk lines.

    Every separator independently becomes, with probability
    ``separator_flip_probability``, a uniform draw from comma/tab/pipe/caret.
    A junk header and a junk footer line are each added with probability
    ``junk_line_probability``.  Fields containing a separator are quoted.
    """
    _require_no_spans(grid)
    rng = random.Random(cfg.seed)
    lines = []
    if rng.random() < cfg.junk_line_probability:
        lines.append(_junk_line(rng))
    for row in grid.cells:
        out = [_csv_field(row[0].text)] if row else []
        for cell in row[1:]:
            sep = ","
            if rng.random() < cfg.separator_flip_probability:
                sep = rng.choice(SEPARATORS)
            out.append(sep)
            out.append(_csv_field(cell.text))
        lines.append("".join(out))
    if rng.random() < cfg.junk_line_probability:
        lines.append(_junk_line(rng))
    return "\n".join(lines)


def header_keys(grid: TableGrid) -> list[str]:
    """Column keys from the leading header rows, made unique with ``#k`` suffixes.

    Several header rows are joined per column with a single space.
    """
    n_head = grid.header_rows()
    if n_head == 0:
        raise NoHeader("table has no header row")
    keys = []
    for c in range(grid.n_cols):
        parts = [grid.cells[r][c].text for r in range(n_head) if grid.cells[r][c].text]
        keys.append(" ".join(parts))
    seen: dict[str, int] = {}
    unique = []
    taken = set(keys)
    for k in keys:
        count = seen.get(k, 0) + 1
        seen[k] = count
        if count == 1:
            unique.append(k)
            continue
        candidate = k + _DUP_SUFFIX.format(count)
        while candidate in taken:
            count += 1
            candidate = k + _DUP_SUFFIX.format(count)
        seen[k] = count
        taken.add(candidate)
        unique.append(candidate)
    return unique


def make_json(grid: TableGrid) -> str:
    """Array of row objects keyed by the header texts, in column order."""
    _require_no_spans(grid)
    keys = header_keys(grid)
    body = grid.cells[grid.header_rows():]
    rows = [{k: cell.text for k, cell in zip(keys, row)} for row in body]
    return json.dumps(rows, ensure_ascii=False, indent=2)


def sample_ids(ids: Iterable[str], n: int, seed: int = 0) -> list[str]:
    """Seeded choice of ``n`` ids, returned in sorted order; input order does not matter."""
    pool = sorted(ids)
    return sorted(random.Random(seed).sample(pool, min(n, len(pool))))


def perturb_task(
    task: Task, seed: int = 0, cfg: Optional[PerturbConfig] = None
) -> tuple[Optional[Task], Optional[Task]]:
    """Noisy-CSV and JSON variants of one task, None where the task is excluded.

    Tables with spans get neither variant, headerless tables no JSON variant.
    The CSV noise is seeded from ``seed`` and the task id.
    """
    cfg = cfg or PerturbConfig(seed=seed)
    try:
        grid = to_grid(parse_table(task.ground_truth_html))
    except TableError:
        return None, None
    if grid.has_spans() or grid.n_rows == 0:
        return None, None
    task_cfg = PerturbConfig(
        seed=_task_seed(seed, task.id),
        separator_flip_probability=cfg.separator_flip_probability,
        junk_line_probability=cfg.junk_line_probability,
    )
    csv_task = task.with_(raw_text=make_noisy_csv(grid, task_cfg))
    try:
        json_task = task.with_(raw_text=make_json(grid))
    except NoHeader:
        json_task = None
    return csv_task, json_task


def sample_robustness_set(
    tasks: Sequence[Task],
    n: int,
    seed: int = 0,
    cfg: Optional[PerturbConfig] = None,
) -> tuple[list[Task], list[Task]]:
    """Sample ``n`` tasks, then build the noisy-CSV and JSON variants.

    Exclusions happen after sampling, so each set holds at most ``n`` tasks.
    Both sets are in id order.
    """
    by_id = {t.id: t for t in tasks}
    csv_tasks, json_tasks = [], []
    for task_id in sample_ids(by_id, n, seed):
        csv_task, json_task = perturb_task(by_id[task_id], seed, cfg)
        if csv_task is not None:
            csv_tasks.append(csv_task)
        if json_task is not None:
            json_tasks.append(json_task)
    return csv_tasks, json_tasks


def _task_seed(seed: int, task_id: str) -> int:
    # str seeding hashes with sha512, stable across runs and platforms
    return random.Random(f"{seed}:{task_id}").getrandbits(64)
