"""Seeded train/val/test partitioning with per-dataset contribution counts."""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from typing import Mapping, Optional, Sequence

from ..tasks import DATASETS, SPLITS, Task

DATASET_NAMES = {
    "pubtabnet": "PubTabNet",
    "fintabnet": "FinTabNet",
    "scitsr": "SciTSR",
    "other": "Other",
}


def _sizes_from_ratios(n: int, ratios: Sequence[float]) -> list[int]:
    total = float(sum(ratios))
    if total <= 0 or any(r < 0 for r in ratios):
        raise ValueError(f"invalid split ratios {ratios}")
    raw = [n * r / total for r in ratios]
    sizes = [int(x) for x in raw]
    # largest remainder; earlier splits win ties
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def _cut(tasks: list[Task], sizes: Sequence[int]) -> dict[str, list[Task]]:
    if len(sizes) != len(SPLITS):
        raise ValueError("expected three sizes (train, val, test)")
    if any(s < 0 for s in sizes):
        raise ValueError(f"negative split size in {sizes}")
    if sum(sizes) > len(tasks):
        raise ValueError(f"requested {sum(sizes)} tasks but only {len(tasks)} available")
    out, pos = {}, 0
    for split, size in zip(SPLITS, sizes):
        out[split] = [t.with_(split=split) for t in tasks[pos : pos + size]]
        pos += size
    return out


def split_tasks(
    tasks: Sequence[Task],
    sizes: Optional[Sequence[int]] = None,
    *,
    ratios: Optional[Sequence[float]] = None,
    per_dataset: Optional[Mapping[str, Sequence[int]]] = None,
    seed: int = 0,
) -> tuple[dict[str, list[Task]], dict[str, dict[str, int]]]:
    """Partition tasks into train/val/test.

    Give exactly one of ``sizes`` (absolute counts, remaining tasks unused),
    ``ratios`` (all tasks used), or ``per_dataset`` (absolute counts per
    source dataset).  The shuffle depends on ``seed`` and the task ids only,
    not on input order.  Returns the splits and the dataset-by-split counts.
    """
    if sum(x is not None for x in (sizes, ratios, per_dataset)) != 1:
        raise ValueError("give exactly one of sizes, ratios, per_dataset")
    rng = random.Random(seed)
    ordered = sorted(tasks, key=lambda t: t.id)
    rng.shuffle(ordered)
    if per_dataset is not None:
        groups: dict[str, list[Task]] = defaultdict(list)
        for t in ordered:
            groups[t.source_dataset].append(t)
        splits: dict[str, list[Task]] = {s: [] for s in SPLITS}
        for ds in sorted(per_dataset):
            part = _cut(groups.get(ds, []), per_dataset[ds])
            for s in SPLITS:
                splits[s].extend(part[s])
    else:
        if ratios is not None:
            sizes = _sizes_from_ratios(len(ordered), ratios)
        splits = _cut(ordered, sizes)
    for s in SPLITS:
        splits[s].sort(key=lambda t: t.id)
    return splits, contribution_table(splits)


def contribution_table(splits: Mapping[str, Sequence[Task]]) -> dict[str, dict[str, int]]:
    counts: dict[str, Counter] = defaultdict(Counter)
    for split, items in splits.items():
        for t in items:
            counts[t.source_dataset][split] += 1
    return {
        ds: {s: counts[ds][s] for s in SPLITS}
        for ds in DATASETS
        if ds in counts
    }


def format_contribution_table(table: Mapping[str, Mapping[str, int]]) -> str:
    """Plain-text table: one row per dataset, Train / Val / Test columns."""
    header = ("Dataset", "Train", "Val", "Test")
    rows = [
        (DATASET_NAMES.get(ds, ds), *(str(table[ds][s]) for s in SPLITS)) for ds in table
    ]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(4)]
    lines = []
    for r in [header, *rows]:
        lines.append("  ".join(
            cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))
        ).rstrip())
    return "\n".join(lines)
