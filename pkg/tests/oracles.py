"""Brute-force reference implementations used to check the fast metrics.

Nothing here shares code with the implementations under test beyond the tree
and grid data types.
"""

from __future__ import annotations

import heapq
import itertools
import random
from typing import Callable

from tablerepair.table_model import GridCell, Node, TableGrid, TableTree

# ---------------------------------------------------------------------------
# tree edit distance
# ---------------------------------------------------------------------------


def _flatten(root: Node):
    """Preorder labels, preorder index, and ancestor sets."""
    labels, ancestors = [], []

    def walk(node, anc):
        idx = len(labels)
        labels.append(node.label)
        ancestors.append(frozenset(anc))
        for ch in node.children:
            walk(ch, anc | {idx})

    walk(root, frozenset())
    return labels, ancestors


def ted_by_mapping(a: TableTree, b: TableTree, sub, ins, dele) -> float:
    """Minimum-cost edit mapping, by enumerating every valid partial mapping.

    A mapping is valid when it is one-to-one and preserves both preorder
    (sibling/left-to-right) order and the ancestor relation.  The cheapest
    valid mapping costs exactly the cheapest edit script.
    """
    la, anc_a = _flatten(a.root)
    lb, anc_b = _flatten(b.root)
    na, nb = len(la), len(lb)
    best = [sum(dele(x) for x in la) + sum(ins(y) for y in lb)]

    def consistent(i, j, pairs):
        for i2, j2 in pairs:
            # preorder order
            if (i2 < i) != (j2 < j):
                return False
            if (i2 in anc_a[i]) != (j2 in anc_b[j]):
                return False
        return True

    def rec(i, pairs, used, cost):
        if i == na:
            total = cost + sum(ins(lb[j]) for j in range(nb) if j not in used)
            if total < best[0]:
                best[0] = total
            return
        rec(i + 1, pairs, used, cost + dele(la[i]))
        for j in range(nb):
            if j in used or not consistent(i, j, pairs):
                continue
            pairs.append((i, j))
            used.add(j)
            rec(i + 1, pairs, used, cost + sub(la[i], lb[j]))
            pairs.pop()
            used.discard(j)

    rec(0, [], set(), 0)
    return best[0]


def _to_forest(node: Node):
    return (node.label, tuple(_to_forest(c) for c in node.children))


def _forest_size(forest) -> int:
    return sum(1 + _forest_size(t[1]) for t in forest)


def _deletes(forest):
    for k, (lab, kids) in enumerate(forest):
        yield forest[:k] + kids + forest[k + 1 :]
        for sub in _deletes(kids):
            yield forest[:k] + ((lab, sub),) + forest[k + 1 :]


def _relabels(forest, alphabet):
    for k, (lab, kids) in enumerate(forest):
        for new in alphabet:
            if new != lab:
                yield forest[:k] + ((new, kids),) + forest[k + 1 :]
        for sub in _relabels(kids, alphabet):
            yield forest[:k] + ((lab, sub),) + forest[k + 1 :]


def _inserts(forest, alphabet):
    n = len(forest)
    for i in range(n + 1):
        for j in range(i, n + 1):
            for lab in alphabet:
                yield forest[:i] + ((lab, forest[i:j]),) + forest[j:]
    for k, (lab, kids) in enumerate(forest):
        for sub in _inserts(kids, alphabet):
            yield forest[:k] + ((lab, sub),) + forest[k + 1 :]


def ted_by_script_search(a: TableTree, b: TableTree) -> int:
    """Unit-cost edit distance by shortest-path search over edit scripts.

    States are ordered forests; moves are single relabel/delete/insert
    operations.  Intermediate forests are capped at ``max(|a|, |b|)`` nodes.
    Only practical for trees of a handful of nodes.
    """
    start = (_to_forest(a.root),)
    goal = (_to_forest(b.root),)
    alphabet = sorted({n.label for n in a.root.preorder()} | {n.label for n in b.root.preorder()})
    cap = max(a.size, b.size)
    dist = {start: 0}
    heap = [(0, 0, start)]
    counter = itertools.count(1)
    while heap:
        d, _, state = heapq.heappop(heap)
        if state == goal:
            return d
        if d > dist[state]:
            continue
        moves = itertools.chain(_deletes(state), _relabels(state, alphabet))
        if _forest_size(state) < cap:
            moves = itertools.chain(moves, _inserts(state, alphabet))
        for nxt in moves:
            if d + 1 < dist.get(nxt, 1 << 30):
                dist[nxt] = d + 1
                heapq.heappush(heap, (d + 1, next(counter), nxt))
    raise AssertionError("goal unreachable")


def _deletion_results(root: Node):
    """Every forest obtainable by deleting a subset of nodes, as
    (shape, labels in preorder, deleted labels)."""
    nodes = list(root.preorder())
    index = {id(n): k for k, n in enumerate(nodes)}
    out = []
    for mask in range(1 << len(nodes)):

        def build(node):
            kids = [t for ch in node.children for t in build(ch)]
            if mask >> index[id(node)] & 1:
                return kids
            return [(node.label, tuple(kids))]

        forest = tuple(build(root))
        deleted = [n.label for k, n in enumerate(nodes) if mask >> k & 1]
        out.append((_shape(forest), _labels(forest), deleted))
    return out


def _shape(forest):
    return tuple(_shape(kids) for _, kids in forest)


def _labels(forest):
    out = []
    for lab, kids in forest:
        out.append(lab)
        out.extend(_labels(kids))
    return out


def ted_by_normal_scripts(a: TableTree, b: TableTree, sub=None, ins=None, dele=None) -> float:
    """Edit distance by exhaustive search over scripts in normal form.

    Any edit script can be reordered as deletions, then relabels, then
    insertions without raising its cost.  So it suffices to try every set of
    deletions in ``a`` and every set of (reverse) insertions in ``b``, pairing
    results of identical shape and relabeling position by position.
    """
    sub = sub or (lambda x, y: int(x != y))
    ins = ins or (lambda y: 1)
    dele = dele or (lambda x: 1)
    by_shape: dict = {}
    for shape, labels, deleted in _deletion_results(b.root):
        by_shape.setdefault(shape, []).append((labels, sum(ins(y) for y in deleted)))
    best = None
    for shape, labels_a, deleted in _deletion_results(a.root):
        cost_a = sum(dele(x) for x in deleted)
        for labels_b, cost_b in by_shape.get(shape, ()):
            total = cost_a + cost_b + sum(sub(x, y) for x, y in zip(labels_a, labels_b))
            if best is None or total < best:
                best = total
    return best


def random_tree(rng: random.Random, n: int, alphabet="abc") -> TableTree:
    """Random ordered tree with ``n`` nodes, built by appending nodes in BFS order."""
    labels = [rng.choice(alphabet) for _ in range(n)]
    children: list[list[int]] = [[] for _ in range(n)]
    for k in range(1, n):
        children[rng.randrange(k)].append(k)

    def build(k):
        return Node(labels[k], tuple(build(c) for c in children[k]))

    return TableTree(build(0))


# ---------------------------------------------------------------------------
# grid similarity
# ---------------------------------------------------------------------------


def _alignments(m: int, n: int):
    for k in range(min(m, n) + 1):
        for xs in itertools.combinations(range(m), k):
            for ys in itertools.combinations(range(n), k):
                yield list(zip(xs, ys))


def grits_exhaustive(a: TableGrid, b: TableGrid, sim: Callable[[GridCell, GridCell], float]) -> float:
    """Exact normalized 2D most-similar-substructure by trying every row and column alignment."""
    best = 0.0
    row_aligns = list(_alignments(a.n_rows, b.n_rows))
    col_aligns = list(_alignments(a.n_cols, b.n_cols))
    for rows in row_aligns:
        for cols in col_aligns:
            s = sum(sim(a[i, j], b[k, l]) for i, k in rows for j, l in cols)
            if s > best:
                best = s
    return 2.0 * best / (a.n_rows * a.n_cols + b.n_rows * b.n_cols)


def text_grid(rows: list[list[str]]) -> TableGrid:
    """Span-free grid from a matrix of texts."""
    cells = tuple(
        tuple(GridCell(text=t, anchor=(r, c)) for c, t in enumerate(row))
        for r, row in enumerate(rows)
    )
    return TableGrid(len(rows), len(rows[0]) if rows else 0, cells)


def random_text_grid(rng: random.Random, max_rows=3, max_cols=3, alphabet="abc") -> TableGrid:
    r = rng.randint(1, max_rows)
    c = rng.randint(1, max_cols)
    return text_grid([[rng.choice(alphabet) for _ in range(c)] for _ in range(r)])


def random_span_html(rng: random.Random, n_rows: int, n_cols: int, span_prob=0.35, alphabet="abcxyz"):
    """Random valid table HTML whose spans tile an ``n_rows x n_cols`` grid."""
    owner = [[None] * n_cols for _ in range(n_rows)]
    anchors = {}
    for r in range(n_rows):
        for c in range(n_cols):
            if owner[r][c] is not None:
                continue
            rs = cs = 1
            if rng.random() < span_prob:
                max_cs = 1
                while c + max_cs < n_cols and owner[r][c + max_cs] is None:
                    max_cs += 1
                cs = rng.randint(1, max_cs)
                rs = rng.randint(1, n_rows - r)
                # shrink rowspan until the rectangle is free
                while any(owner[r + dr][c + dc] is not None for dr in range(rs) for dc in range(cs)):
                    rs -= 1
            for dr in range(rs):
                for dc in range(cs):
                    owner[r + dr][c + dc] = (r, c)
            anchors[(r, c)] = (rs, cs, "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 3))))
    parts = ["<table>"]
    for r in range(n_rows):
        parts.append("<tr>")
        for c in range(n_cols):
            if (r, c) in anchors:
                rs, cs, text = anchors[(r, c)]
                attrs = (f" rowspan={rs}" if rs > 1 else "") + (f" colspan='{cs}'" if cs > 1 else "")
                parts.append(f"<td{attrs}>{text}</td>")
        parts.append("</tr>")
    parts.append("</table>")
    return "".join(parts), owner
