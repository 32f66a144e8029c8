"""Ordered tree edit distance (Zhang-Shasha) under pluggable label costs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from ..table_model import Node, TableTree
from .strings import levenshtein


@dataclass(frozen=True)
class CostModel:
    """Edit costs on node labels.

    ``unit``: relabel costs 0 or 1, insert/delete cost 1.
    ``levenshtein``: relabel costs the string edit distance of the labels,
    insert/delete cost ``max(1, len(label))``.
    """

    kind: Literal["unit", "levenshtein"] = "unit"

    def __post_init__(self) -> None:
        if self.kind not in ("unit", "levenshtein"):
            raise ValueError(f"unknown cost model {self.kind!r}")

    def substitute(self, a: str, b: str) -> int:
        if self.kind == "unit":
            return 0 if a == b else 1
        return levenshtein(a, b)

    def insert(self, label: str) -> int:
        return 1 if self.kind == "unit" else max(1, len(label))

    delete = insert


UNIT = CostModel("unit")
LEVENSHTEIN = CostModel("levenshtein")


def _postorder(root: Node) -> tuple[list[str], list[int]]:
    """Postorder labels and leftmost-leaf-descendant indices."""
    labels: list[str] = []
    leftmost: list[int] = []
    # explicit stack: (node, child cursor, leftmost leaf index seen so far)
    stack: list[list] = [[root, 0, None]]
    while stack:
        frame = stack[-1]
        node, k = frame[0], frame[1]
        if k < len(node.children):
            frame[1] += 1
            stack.append([node.children[k], 0, None])
            continue
        stack.pop()
        idx = len(labels)
        labels.append(node.label)
        lm = idx if frame[2] is None else frame[2]
        leftmost.append(lm)
        if stack and stack[-1][2] is None:
            stack[-1][2] = lm
    return labels, leftmost


def _keyroots(leftmost: list[int]) -> list[int]:
    last: dict[int, int] = {}
    for i, lm in enumerate(leftmost):
        last[lm] = i
    return sorted(last.values())


def ted(a: TableTree | Node, b: TableTree | Node, cost: CostModel = UNIT) -> int:
    """Exact ordered tree edit distance between ``a`` and ``b``."""
    ra = a.root if isinstance(a, TableTree) else a
    rb = b.root if isinstance(b, TableTree) else b
    la, lma = _postorder(ra)
    lb, lmb = _postorder(rb)
    dcost = [cost.delete(x) for x in la]
    icost = [cost.insert(y) for y in lb]
    sub_cache: dict[tuple[str, str], int] = {}

    def sub(x: str, y: str) -> int:
        key = (x, y)
        v = sub_cache.get(key)
        if v is None:
            v = sub_cache[key] = cost.substitute(x, y)
        return v

    nb = len(lb)
    td = [[0] * nb for _ in range(len(la))]
    for i in _keyroots(lma):
        li = lma[i]
        m = i - li + 2
        for j in _keyroots(lmb):
            lj = lmb[j]
            n = j - lj + 2
            fd = [[0] * n for _ in range(m)]
            row0 = fd[0]
            for y in range(1, n):
                row0[y] = row0[y - 1] + icost[lj + y - 1]
            for x in range(1, m):
                ia = li + x - 1
                prev, cur = fd[x - 1], fd[x]
                cur[0] = prev[0] + dcost[ia]
                d = dcost[ia]
                ia_is_tree = lma[ia] == li
                p = lma[ia] - li
                td_ia = td[ia]
                label_a = la[ia]
                for y in range(1, n):
                    jb = lj + y - 1
                    best = prev[y] + d
                    v = cur[y - 1] + icost[jb]
                    if v < best:
                        best = v
                    if ia_is_tree and lmb[jb] == lj:
                        v = prev[y - 1] + sub(label_a, lb[jb])
                        if v < best:
                            best = v
                        td_ia[jb] = best
                    else:
                        v = fd[p][lmb[jb] - lj] + td_ia[jb]
                        if v < best:
                            best = v
                    cur[y] = best
    return td[-1][-1]
