"""Task records and line-delimited JSON helpers."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

DATASETS = ("pubtabnet", "fintabnet", "scitsr", "other")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Task:
    id: str
    raw_text: str
    ground_truth_html: str
    source_dataset: str = "other"
    split: Optional[str] = None

    def __post_init__(self) -> None:
        if self.source_dataset not in DATASETS:
            raise ValueError(f"unknown source_dataset {self.source_dataset!r}")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Task":
        return cls(
            id=str(d["id"]),
            raw_text=d["raw_text"],
            ground_truth_html=d["ground_truth_html"],
            source_dataset=d.get("source_dataset", "other"),
            split=d.get("split"),
        )

    def with_(self, **changes: Any) -> "Task":
        return replace(self, **changes)


def dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def iter_jsonl(path: str | os.PathLike) -> Iterator[dict]:
    """Yield objects from a JSONL file; a torn final line (interrupted write) is skipped."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            if not line.endswith("\n"):
                try:
                    yield json.loads(line)
                except json.JSONDecodeError:
                    return
                return
            yield json.loads(line)


def write_jsonl(path: str | os.PathLike, records: Iterable[Any]) -> int:
    n = 0
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            if hasattr(rec, "to_dict"):
                rec = rec.to_dict()
            fh.write(dumps(rec) + "\n")
            n += 1
    return n


def iter_tasks(path: str | os.PathLike) -> Iterator[Task]:
    for d in iter_jsonl(path):
        yield Task.from_dict(d)


def read_tasks(path: str | os.PathLike) -> list[Task]:
    tasks = list(iter_tasks(path))
    seen: set[str] = set()
    for t in tasks:
        if t.id in seen:
            raise ValueError(f"duplicate task id {t.id!r} in {path}")
        seen.add(t.id)
    return tasks


class JsonlIndex:
    """Byte-offset index of a JSONL file keyed by a field, for random access
    without holding the records in memory."""

    def __init__(self, path: str | os.PathLike, key: str = "id"):
        self.path = Path(path)
        self.offsets: dict[str, int] = {}
        with open(self.path, "rb") as fh:
            pos = 0
            for line in fh:
                if line.strip():
                    self.offsets[str(json.loads(line)[key])] = pos
                pos += len(line)
        self._fh = open(self.path, "rb")

    def __contains__(self, k: str) -> bool:
        return k in self.offsets

    def __getitem__(self, k: str) -> dict:
        self._fh.seek(self.offsets[k])
        return json.loads(self._fh.readline())

    def keys(self):
        return self.offsets.keys()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "JsonlIndex":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
