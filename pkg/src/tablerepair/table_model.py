"""HTML table parsing and the tree / grid / canonical-string representations.

A parsed table is an ordered labeled tree.  Structural nodes are labeled with
their tag (``table``, ``thead``, ``tbody``, ``tr``, ``td``, ``th``); a spanning
cell carries its spans in the label (``td@r2c1``) and the cell text hangs off
the cell as a single leaf node.  Labels stay plain strings so the same tree
feeds both the unit-cost and the Levenshtein-cost edit distances.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Any, Iterable, Iterator, Mapping, Optional

from .errors import NoTableFound, SpanOverflow, TableError, UnbalancedMarkup

__all__ = [
    "Node",
    "TableTree",
    "GridCell",
    "TableGrid",
    "ValidityVerdict",
    "parse_table",
    "to_grid",
    "canonical_html",
    "grid_to_html",
    "check_validity",
    "scitsr_to_html",
    "cell_label",
    "split_cell_label",
    "collapse_ws",
]

CELL_TAGS = ("td", "th")
SECTION_TAGS = ("thead", "tbody")
MAX_COLSPAN = 1000
MAX_ROWSPAN = 65534

_WS = re.compile(r"\s+")
_CELL_LABEL = re.compile(r"^(td|th)(?:@r(\d+)c(\d+))?$")
# tags whose boundaries separate words when flattened to text
_BREAKING_TAGS = frozenset(
    "br p div li ul ol tr td th table caption h1 h2 h3 h4 h5 h6 hr".split()
)


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


@dataclass(frozen=True)
class Node:
    label: str
    children: tuple["Node", ...] = ()

    def size(self) -> int:
        return 1 + sum(child.size() for child in self.children)

    def preorder(self) -> Iterator["Node"]:
        yield self
        for child in self.children:
            yield from child.preorder()


@dataclass(frozen=True)
class TableTree:
    root: Node

    @property
    def size(self) -> int:
        return self.root.size()

    @classmethod
    def from_nested(cls, spec: Any) -> "TableTree":
        """Build a tree from ``"label"`` or ``("label", [child, ...])`` nesting."""
        return cls(_node_from_nested(spec))


def _node_from_nested(spec: Any) -> Node:
    if isinstance(spec, str):
        return Node(spec)
    label, kids = spec
    return Node(label, tuple(_node_from_nested(k) for k in kids))


def cell_label(tag: str, rowspan: int = 1, colspan: int = 1) -> str:
    if rowspan == 1 and colspan == 1:
        return tag
    return f"{tag}@r{rowspan}c{colspan}"


def split_cell_label(label: str) -> Optional[tuple[str, int, int]]:
    """Return ``(tag, rowspan, colspan)`` for a cell label, None otherwise."""
    m = _CELL_LABEL.match(label)
    if m is None:
        return None
    rs = int(m.group(2)) if m.group(2) else 1
    cs = int(m.group(3)) if m.group(3) else 1
    return m.group(1), rs, cs


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


@dataclass
class _Builder:
    label: str
    children: list = field(default_factory=list)
    text: list = field(default_factory=list)

    def freeze(self, collapse: bool) -> Node:
        if self.text is not None and split_cell_label(self.label):
            raw = "".join(self.text)
            if raw.strip():
                leaf = collapse_ws(raw) if collapse else raw
                return Node(self.label, (Node(leaf),))
            return Node(self.label)
        return Node(self.label, tuple(c.freeze(collapse) for c in self.children))


def _span(attrs: Mapping[str, Optional[str]], name: str, cap: int) -> int:
    value = attrs.get(name)
    if value is None:
        return 1
    m = re.match(r"\s*(\d+)", value)
    if m is None:
        return 1
    n = int(m.group(1))
    if n < 1:
        return 1
    return min(n, cap)


class _TableParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root: Optional[_Builder] = None
        self.done = False
        self.depth = 0  # table nesting depth, 1 = the outer table
        self.section: Optional[_Builder] = None
        self.row: Optional[_Builder] = None
        self.cell: Optional[_Builder] = None

    # structure helpers
    def _close_cell(self) -> None:
        self.cell = None

    def _close_row(self) -> None:
        self._close_cell()
        self.row = None

    def _close_section(self) -> None:
        self._close_row()
        self.section = None

    def _open_row(self) -> None:
        self._close_row()
        self.row = _Builder("tr")
        parent = self.section if self.section is not None else self.root
        parent.children.append(self.row)

    def handle_starttag(self, tag: str, attrs: list) -> None:
        if self.done:
            return
        if self.root is None:
            if tag == "table":
                self.root = _Builder("table")
                self.depth = 1
            return
        if tag == "table":
            self.depth += 1
            self._cell_break()
            return
        if self.depth > 1:
            if tag in _BREAKING_TAGS:
                self._cell_break()
            return
        if tag in ("thead", "tbody", "tfoot"):
            self._close_section()
            self.section = _Builder("thead" if tag == "thead" else "tbody")
            self.root.children.append(self.section)
        elif tag == "tr":
            self._open_row()
        elif tag in CELL_TAGS:
            self._close_cell()
            if self.row is None:
                self._open_row()
            a = {k.lower(): v for k, v in attrs}
            label = cell_label(
                tag, _span(a, "rowspan", MAX_ROWSPAN), _span(a, "colspan", MAX_COLSPAN)
            )
            self.cell = _Builder(label, text=[])
            self.row.children.append(self.cell)
        elif tag in _BREAKING_TAGS:
            self._cell_break()

    def handle_endtag(self, tag: str) -> None:
        if self.done or self.root is None:
            return
        if tag == "table":
            self.depth -= 1
            if self.depth == 0:
                self._close_section()
                self.done = True
            else:
                self._cell_break()
            return
        if self.depth > 1:
            if tag in _BREAKING_TAGS:
                self._cell_break()
            return
        if tag in CELL_TAGS:
            self._close_cell()
        elif tag == "tr":
            self._close_row()
        elif tag in ("thead", "tbody", "tfoot"):
            self._close_section()
        elif tag in _BREAKING_TAGS:
            self._cell_break()

    def handle_data(self, data: str) -> None:
        if self.cell is not None and not self.done:
            self.cell.text.append(data)

    def _cell_break(self) -> None:
        if self.cell is not None:
            self.cell.text.append(" ")


def parse_table(markup: str, *, collapse_whitespace: bool = False) -> TableTree:
    """Parse the first ``<table>`` element found in ``markup``.

    Text around the table is ignored, unknown tags inside cells are reduced to
    their text, and missing ``</td>``/``</tr>``/section end tags are recovered.
    A table that is never closed raises :class:`UnbalancedMarkup`.

    With ``collapse_whitespace`` the cell text leaves are whitespace-normalized
    (as :func:`canonical_html` would write them).
    """
    parser = _TableParser()
    parser.feed(markup)
    parser.close()
    if parser.root is None:
        raise NoTableFound("no <table> element in input")
    if not parser.done:
        raise UnbalancedMarkup("<table> element is never closed")
    return TableTree(parser.root.freeze(collapse_whitespace))


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridCell:
    text: str = ""
    rowspan: int = 1
    colspan: int = 1
    row_offset: int = 0
    col_offset: int = 0
    header: bool = False
    # grid location of the source cell's top-left corner; padding cells anchor on themselves
    anchor: tuple[int, int] = (0, 0)

    @property
    def is_anchor(self) -> bool:
        return self.row_offset == 0 and self.col_offset == 0


@dataclass(frozen=True)
class TableGrid:
    n_rows: int
    n_cols: int
    cells: tuple[tuple[GridCell, ...], ...]

    def __getitem__(self, rc: tuple[int, int]) -> GridCell:
        r, c = rc
        return self.cells[r][c]

    def texts(self) -> list[list[str]]:
        return [[cell.text for cell in row] for row in self.cells]

    def has_spans(self) -> bool:
        return any(c.rowspan > 1 or c.colspan > 1 for row in self.cells for c in row)

    def header_rows(self) -> int:
        """Number of leading rows made entirely of header cells."""
        n = 0
        for row in self.cells:
            if row and all(c.header for c in row):
                n += 1
            else:
                break
        return n

    def occupancy(self) -> list[list[tuple[int, int]]]:
        return [[cell.anchor for cell in row] for row in self.cells]


def _rows_of(tree: TableTree) -> list[tuple[Node, bool]]:
    rows = []
    for child in tree.root.children:
        if child.label in SECTION_TAGS:
            in_head = child.label == "thead"
            rows.extend((r, in_head) for r in child.children if r.label == "tr")
        elif child.label == "tr":
            rows.append((child, False))
    return rows


def _cell_text(cell: Node) -> str:
    return collapse_ws("".join(leaf.label for leaf in cell.children))


def to_grid(tree: TableTree) -> TableGrid:
    """Expand spans with the HTML placement rules into a rectangular grid.

    Cells go left to right into the first free column, rowspans carry down
    (clipped at the last row), and short rows are padded with empty cells.
    Two declared spans claiming the same location raise :class:`SpanOverflow`.
    """
    rows = _rows_of(tree)
    n_rows = len(rows)
    placed: dict[tuple[int, int], GridCell] = {}
    n_cols = 0
    for r, (row, in_head) in enumerate(rows):
        c = 0
        for cell in row.children:
            parts = split_cell_label(cell.label)
            if parts is None:
                continue
            tag, rs, cs = parts
            while (r, c) in placed:
                c += 1
            rs = min(rs, n_rows - r)
            header = in_head or tag == "th"
            text = _cell_text(cell)
            for dr in range(rs):
                for dc in range(cs):
                    loc = (r + dr, c + dc)
                    if loc in placed:
                        raise SpanOverflow(
                            f"cell anchored at {(r, c)} overlaps another cell at {loc}"
                        )
                    placed[loc] = GridCell(text, rs, cs, dr, dc, header, (r, c))
            c += cs
            n_cols = max(n_cols, c)
    cells = tuple(
        tuple(placed.get((r, c)) or GridCell(anchor=(r, c)) for c in range(n_cols))
        for r in range(n_rows)
    )
    return TableGrid(n_rows, n_cols, cells)


# ---------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------


def _emit(node: Node, out: list[str]) -> None:
    parts = split_cell_label(node.label)
    if parts is not None:
        tag, rs, cs = parts
        attrs = ""
        if rs != 1:
            attrs += f' rowspan="{rs}"'
        if cs != 1:
            attrs += f' colspan="{cs}"'
        text = collapse_ws("".join(leaf.label for leaf in node.children))
        out.append(f"<{tag}{attrs}>{html.escape(text, quote=False)}</{tag}>")
        return
    tag = node.label.lower()
    out.append(f"<{tag}>")
    for child in node.children:
        _emit(child, out)
    out.append(f"</{tag}>")


def canonical_html(tree: TableTree) -> str:
    out: list[str] = []
    _emit(tree.root, out)
    return "".join(out)


def grid_to_html(grid: TableGrid) -> str:
    """Canonical HTML for a grid: one cell per anchor, header cells as ``th``."""
    rows = []
    for row in grid.cells:
        cells = []
        for cell in row:
            if not cell.is_anchor:
                continue
            tag = "th" if cell.header else "td"
            kids = (Node(cell.text),) if cell.text else ()
            cells.append(Node(cell_label(tag, cell.rowspan, cell.colspan), kids))
        rows.append(Node("tr", tuple(cells)))
    return canonical_html(TableTree(Node("table", tuple(rows))))


# ---------------------------------------------------------------------------
# validity check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidityVerdict:
    well_formed: bool
    quality_pass: bool
    reason: str
    teds: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "well_formed": self.well_formed,
            "quality_pass": self.quality_pass,
            "reason": self.reason,
            "teds": self.teds,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ValidityVerdict":
        return cls(d["well_formed"], d["quality_pass"], d["reason"], d.get("teds"))


def check_validity(
    candidate_html: str,
    ground_truth: Optional[TableTree] = None,
    quality_threshold: float = 0.5,
) -> ValidityVerdict:
    """Well-formedness and (with a ground truth) TEDS quality gate.

    Failures are reported in the verdict, never raised.
    """
    if not 0.0 <= quality_threshold <= 1.0:
        raise ValueError(f"quality_threshold must be in [0, 1], got {quality_threshold}")
    try:
        tree = parse_table(candidate_html, collapse_whitespace=True)
        grid = to_grid(tree)
    except TableError as exc:
        return ValidityVerdict(False, False, type(exc).__name__)
    if grid.n_rows == 0 or grid.n_cols == 0:
        return ValidityVerdict(False, False, "EmptyTable")
    if not any(cell.text for row in grid.cells for cell in row):
        return ValidityVerdict(False, False, "EmptyTable")
    if ground_truth is None:
        return ValidityVerdict(True, True, "ok")

    from .metrics import teds  # metrics depends on this module

    score = teds(tree, ground_truth)
    if score >= quality_threshold:
        return ValidityVerdict(True, True, "ok", score)
    return ValidityVerdict(True, False, "BelowThreshold", score)


# ---------------------------------------------------------------------------
# SciTSR conversion
# ---------------------------------------------------------------------------


def _content_text(content: Any) -> str:
    if content is None:
        return ""
    if isinstance(content, str):
        return collapse_ws(content)
    return collapse_ws(" ".join(str(tok) for tok in content))


def scitsr_to_html(annotation: Mapping[str, Any] | Iterable[Mapping[str, Any]]) -> str:
    """Convert a SciTSR-style structure annotation into canonical table HTML.

    ``annotation`` is either the JSON object (with a ``"cells"`` array) or the
    cell list itself.  Row/column extents are inclusive.  Uncovered grid
    locations become empty cells so the HTML reproduces the annotated
    occupancy exactly.
    """
    cells = annotation["cells"] if isinstance(annotation, Mapping) else list(annotation)
    if not cells:
        raise NoTableFound("annotation has no cells")
    anchored: dict[tuple[int, int], tuple[int, int, str]] = {}
    covered: set[tuple[int, int]] = set()
    n_rows = n_cols = 0
    for cell in cells:
        r0, r1 = int(cell["start_row"]), int(cell["end_row"])
        c0, c1 = int(cell["start_col"]), int(cell["end_col"])
        if r0 < 0 or c0 < 0 or r1 < r0 or c1 < c0:
            raise SpanOverflow(f"invalid cell extent rows {r0}-{r1}, cols {c0}-{c1}")
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                if (r, c) in covered:
                    raise SpanOverflow(f"annotated cells overlap at {(r, c)}")
                covered.add((r, c))
        anchored[(r0, c0)] = (r1 - r0 + 1, c1 - c0 + 1, _content_text(cell.get("content")))
        n_rows = max(n_rows, r1 + 1)
        n_cols = max(n_cols, c1 + 1)

    rows = []
    for r in range(n_rows):
        row_cells = []
        for c in range(n_cols):
            if (r, c) in anchored:
                rs, cs, text = anchored[(r, c)]
                kids = (Node(text),) if text else ()
                row_cells.append(Node(cell_label("td", rs, cs), kids))
            elif (r, c) not in covered:
                row_cells.append(Node("td"))
        rows.append(Node("tr", tuple(row_cells)))
    return canonical_html(TableTree(Node("table", tuple(rows))))
