"""Shared test data: span tables and small task corpora."""

from __future__ import annotations

import random

from oracles import random_span_html

from tablerepair.tasks import Task

# Two-level column header over a row-grouped body, the shape of a typical
# financial report table.
MULTI_LEVEL_HEADER = """
<table>
  <thead>
    <tr><th rowspan="2">Segment</th><th rowspan="2">Region</th>
        <th colspan="2">Revenue</th><th colspan="2">Operating income</th></tr>
    <tr><th>2019</th><th>2020</th><th>2019</th><th>2020</th></tr>
  </thead>
  <tbody>
    <tr><td rowspan="2">Consumer</td><td>Americas</td><td>1,204</td><td>1,310</td><td>211</td><td>245</td></tr>
    <tr><td>Europe</td><td>833</td><td>790</td><td>102</td><td>88</td></tr>
    <tr><td rowspan="3">Enterprise</td><td>Americas</td><td>2,010</td><td>2,145</td><td>390</td><td>421</td></tr>
    <tr><td>Europe</td><td>1,115</td><td>1,180</td><td>160</td><td>171</td></tr>
    <tr><td>Asia</td><td>640</td><td>702</td><td>75</td><td>93</td></tr>
    <tr><td colspan="2">Total</td><td>5,802</td><td>6,127</td><td>938</td><td>1,018</td></tr>
  </tbody>
</table>
"""

HAND_SPAN_TABLES = [
    MULTI_LEVEL_HEADER,
    "<table><tr><td colspan=2>x</td></tr><tr><td>a</td><td>b</td></tr></table>",
    "<table><tr><td rowspan=2>x</td><td>a</td></tr><tr><td>b</td></tr></table>",
    "<table><tr><td rowspan=2 colspan=2>big</td><td>r</td></tr><tr><td>s</td></tr>"
    "<tr><td>t</td><td>u</td><td>v</td></tr></table>",
    "<table><tr><td>a</td><td rowspan=3>mid</td><td>b</td></tr><tr><td>c</td><td>d</td></tr>"
    "<tr><td>e</td><td>f</td></tr></table>",
    "<table><tr><th colspan=3>Title</th></tr><tr><th>k</th><th colspan=2>v</th></tr>"
    "<tr><td>1</td><td>2</td><td>3</td></tr></table>",
    "<TABLE><TR><TD ROWSPAN='2'>A</TD><TD COLSPAN=\"2\">B</TD></TR><TR><TD>c</TD><TD>d</TD></TR></TABLE>",
    "<table><tbody><tr><td colspan=4>wide</td></tr><tr><td>1</td><td colspan=2>2</td><td>3</td></tr></tbody></table>",
]


def span_fixture_tables(n_random: int = 20, seed: int = 7) -> list[str]:
    rng = random.Random(seed)
    tables = list(HAND_SPAN_TABLES)
    while len(tables) < len(HAND_SPAN_TABLES) + n_random:
        html, owner = random_span_html(rng, rng.randint(2, 5), rng.randint(2, 5), span_prob=0.5)
        if any(owner[r][c] != (r, c) for r in range(len(owner)) for c in range(len(owner[0]))):
            tables.append(html)
    return tables


def table_html(rows: list[list[str]], header: bool = False) -> str:
    parts = ["<table>"]
    for i, row in enumerate(rows):
        tag = "th" if header and i == 0 else "td"
        parts.append("<tr>" + "".join(f"<{tag}>{c}</{tag}>" for c in row) + "</tr>")
    parts.append("</table>")
    return "".join(parts)


def make_tasks(n: int, seed: int = 0, prefix: str = "t") -> list[Task]:
    """Small header-first tables with clipboard-style raw text."""
    rng = random.Random(seed)
    datasets = ["pubtabnet", "fintabnet", "scitsr"]
    tasks = []
    for i in range(n):
        n_rows, n_cols = rng.randint(2, 4), rng.randint(2, 4)
        rows = [[f"h{c}" for c in range(n_cols)]]
        rows += [[f"{rng.randint(0, 999)}" for _ in range(n_cols)] for _ in range(n_rows - 1)]
        raw = "\n".join(" ".join(r) for r in rows)
        tasks.append(Task(f"{prefix}{i:04d}", raw, table_html(rows, header=True), datasets[i % 3]))
    return tasks
