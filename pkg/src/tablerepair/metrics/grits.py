"""Grid table similarity: bounds on the 2D most-similar-substructure score.

For grids ``A`` and ``B`` and a cell similarity ``sim`` in [0, 1], the exact
score picks one order-preserving row alignment and one order-preserving
column alignment, applied jointly, maximizing the summed similarity of the
aligned cells.  That joint problem is hard, so it is bracketed:

* upper bound: let every aligned row pair choose its own column alignment
  (row-factored), and symmetrically for columns; take the smaller relaxation.
* lower bound: start from the alignments found by the two relaxations, then
  alternate between re-solving rows and columns while the value strictly
  improves (at most 10 rounds per start).

Both are normalized as ``2 * S / (|A| + |B|)`` with ``|.|`` the cell count.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import EmptyGrid
from ..table_model import GridCell, TableGrid
from .strings import lcs_similarity

CellSim = Callable[[GridCell, GridCell], float]

MAX_REFINEMENTS = 10


def align_1d(scores: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Best order-preserving partial matching of the two axes of ``scores``.

    Ties prefer a match, then skipping an ``a`` item, then skipping a ``b``
    item, scanning back from the end.
    """
    m, n = scores.shape
    dp = np.zeros((m + 1, n + 1))
    for i in range(1, m + 1):
        s_row = scores[i - 1]
        prev, cur = dp[i - 1], dp[i]
        for j in range(1, n + 1):
            cur[j] = max(prev[j - 1] + s_row[j - 1], prev[j], cur[j - 1])
    pairs = []
    i, j = m, n
    while i > 0 and j > 0:
        v = dp[i, j]
        if v == dp[i - 1, j - 1] + scores[i - 1, j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif v == dp[i - 1, j]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return float(dp[m, n]), pairs


def _factored_scores(sim: np.ndarray) -> np.ndarray:
    """For every (a-row, b-row) pair, the value of its own best column alignment.

    ``sim`` has shape (rows_a, cols_a, rows_b, cols_b); the column DP runs
    once, vectorized over all row pairs.
    """
    ra, ca, rb, cb = sim.shape
    prev = [np.zeros((ra, rb)) for _ in range(cb + 1)]
    for j in range(1, ca + 1):
        cur = [np.zeros((ra, rb))]
        for l in range(1, cb + 1):
            v = np.maximum(prev[l - 1] + sim[:, j - 1, :, l - 1], prev[l])
            cur.append(np.maximum(v, cur[l - 1]))
        prev = cur
    return prev[cb]


def _best_cols(sim: np.ndarray, rows: list) -> tuple[float, list]:
    ca, cb = sim.shape[1], sim.shape[3]
    if not rows:
        return 0.0, []
    col_scores = np.zeros((ca, cb))
    for i, k in rows:
        col_scores += sim[i, :, k, :]
    return align_1d(col_scores)


def _best_rows(sim: np.ndarray, cols: list) -> tuple[float, list]:
    ra, rb = sim.shape[0], sim.shape[2]
    if not cols:
        return 0.0, []
    row_scores = np.zeros((ra, rb))
    for j, l in cols:
        row_scores += sim[:, j, :, l]
    return align_1d(row_scores)


def _refine(sim: np.ndarray, cols: list) -> float:
    best, _ = _best_rows(sim, cols)
    for _ in range(MAX_REFINEMENTS):
        _, rows = _best_rows(sim, cols)
        value, new_cols = _best_cols(sim, rows)
        if value <= best:
            break
        best, cols = value, new_cols
    return best


def _bounds(sim: np.ndarray) -> tuple[float, float]:
    row_relax, row_pairs = align_1d(_factored_scores(sim))
    col_relax, col_pairs = align_1d(_factored_scores(sim.transpose(1, 0, 3, 2)))
    upper = min(row_relax, col_relax)
    # alternate from both relaxations' alignments and keep the better feasible value
    _, cols = _best_cols(sim, row_pairs)
    lower = max(_refine(sim, cols), _refine(sim, col_pairs))
    return lower, upper


def grits_from_matrix(sim: np.ndarray) -> tuple[float, float]:
    """Lower and upper bound given the full 4-D cell similarity array.

    Both argument orders are solved so the bounds are symmetric: the lower
    bound keeps the better feasible value, the upper bound the tighter one.
    """
    ra, ca, rb, cb = sim.shape
    if 0 in sim.shape:
        raise EmptyGrid("both grids need at least one cell")
    lo_ab, up_ab = _bounds(sim)
    lo_ba, up_ba = _bounds(sim.transpose(2, 3, 0, 1))
    upper = min(up_ab, up_ba)
    lower = min(max(lo_ab, lo_ba), upper)
    denom = ra * ca + rb * cb
    return 2.0 * lower / denom, 2.0 * upper / denom


def similarity_matrix(a: TableGrid, b: TableGrid, sim: CellSim) -> np.ndarray:
    out = np.empty((a.n_rows, a.n_cols, b.n_rows, b.n_cols))
    for i, row_a in enumerate(a.cells):
        for j, ca in enumerate(row_a):
            for k, row_b in enumerate(b.cells):
                for l, cb in enumerate(row_b):
                    out[i, j, k, l] = sim(ca, cb)
    return out


def _check_nonempty(a: TableGrid, b: TableGrid) -> None:
    if a.n_rows * a.n_cols == 0 or b.n_rows * b.n_cols == 0:
        raise EmptyGrid("both grids need at least one cell")


def grits(a: TableGrid, b: TableGrid, sim: CellSim) -> tuple[float, float]:
    _check_nonempty(a, b)
    return grits_from_matrix(similarity_matrix(a, b, sim))


def _extent(cell: GridCell) -> tuple[int, int, int, int]:
    return (
        -cell.row_offset,
        cell.rowspan - cell.row_offset,
        -cell.col_offset,
        cell.colspan - cell.col_offset,
    )


def sim_top(c1: GridCell, c2: GridCell) -> float:
    """IoU of the two spanning rectangles placed relative to the aligned location."""
    r0, r1, c0, c1_ = _extent(c1)
    s0, s1, d0, d1 = _extent(c2)
    inter = max(0, min(r1, s1) - max(r0, s0)) * max(0, min(c1_, d1) - max(c0, d0))
    union = (r1 - r0) * (c1_ - c0) + (s1 - s0) * (d1 - d0) - inter
    return inter / union


def sim_con(c1: GridCell, c2: GridCell) -> float:
    return lcs_similarity(c1.text, c2.text)


def _matrix_by_key(a: TableGrid, b: TableGrid, key, sim) -> np.ndarray:
    # many cells share a key (spans, repeated values); compute each distinct pair once
    keys_a = [[key(c) for c in row] for row in a.cells]
    keys_b = [[key(c) for c in row] for row in b.cells]
    ua = sorted(set(k for row in keys_a for k in row))
    ub = sorted(set(k for row in keys_b for k in row))
    ia = {k: n for n, k in enumerate(ua)}
    ib = {k: n for n, k in enumerate(ub)}
    table = np.array([[sim(x, y) for y in ub] for x in ua])
    idx_a = np.array([[ia[k] for k in row] for row in keys_a])
    idx_b = np.array([[ib[k] for k in row] for row in keys_b])
    return table[idx_a[:, :, None, None], idx_b[None, None, :, :]]


def grits_top(a: TableGrid, b: TableGrid) -> tuple[float, float]:
    _check_nonempty(a, b)
    sim = _matrix_by_key(
        a, b, _extent, lambda x, y: sim_top(_from_extent(x), _from_extent(y))
    )
    return grits_from_matrix(sim)


def _from_extent(ext: tuple[int, int, int, int]) -> GridCell:
    r0, r1, c0, c1 = ext
    return GridCell(rowspan=r1 - r0, colspan=c1 - c0, row_offset=-r0, col_offset=-c0)


def grits_con(a: TableGrid, b: TableGrid) -> tuple[float, float]:
    _check_nonempty(a, b)
    return grits_from_matrix(
        _matrix_by_key(a, b, lambda c: c.text, lcs_similarity)
    )
