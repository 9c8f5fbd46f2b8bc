"""Span-aware table model: parsing, occupancy grids, related-cell queries.

Tables arrive as ragged rows of cells; spans make the rendered geometry a
proper grid. The occupancy grid materializes that geometry once, and every
downstream consumer (rendering, structure targets, statistics) reads it
instead of re-deriving span arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import BadHighlight, BadSpan, MalformedRecord, SpanExplosion, UnknownCell

# Hard caps on materialized grids. Scraped data occasionally declares spans
# in the tens of thousands; refusing early beats allocating the grid.
MAX_GRID_COLS = 1_000
MAX_GRID_ROWS = 10_000

# A cell is identified by its position in the ragged representation.
CellId = tuple[int, int]

EMPTY = None


def _reject_control_chars(value: str) -> None:
    for ch in value:
        if ord(ch) < 0x20 or ch == "\x7f":
            raise MalformedRecord(f"cell value contains control character {ch!r}")


@dataclass(frozen=True)
class Cell:
    """One table cell. Spans are counted in grid slots; 1 means no spanning."""

    value: str
    col_span: int = 1
    row_span: int = 1
    is_header: bool = False

    def __post_init__(self):
        if self.col_span < 1 or self.row_span < 1:
            raise BadSpan(
                f"spans must be >= 1, got col_span={self.col_span} row_span={self.row_span}"
            )
        _reject_control_chars(self.value)


@dataclass(frozen=True)
class Table:
    """A ragged table plus its titles and highlighted-cell references.

    ``highlighted`` holds (row, index) pairs into the ragged rows, in the
    order they arrived; use :func:`extract_highlights` for the deduplicated
    reading order.
    """

    rows: tuple[tuple[Cell, ...], ...]
    page_title: str = ""
    section_title: str = ""
    highlighted: tuple[CellId, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        object.__setattr__(self, "highlighted", tuple(tuple(h) for h in self.highlighted))
        if not self.rows:
            raise MalformedRecord("a table needs at least one row")
        for r, i in self.highlighted:
            if not (0 <= r < len(self.rows) and 0 <= i < len(self.rows[r])):
                raise BadHighlight(f"highlight ({r}, {i}) is outside the table")

    def cell(self, ref: CellId) -> Cell:
        return self.rows[ref[0]][ref[1]]


@dataclass(frozen=True)
class Grid:
    """Resolved slot geometry for one table.

    ``slots[r][c]`` is the CellId occupying that slot or EMPTY. ``anchors``
    maps each CellId to (top_row, left_col, row_span, col_span); every cell
    occupies exactly that rectangle and no two cells share a slot.
    """

    n_rows: int
    n_cols: int
    slots: tuple[tuple[CellId | None, ...], ...]
    anchors: dict[CellId, tuple[int, int, int, int]] = field(repr=False)


def parse_table(record: dict[str, Any]) -> Table:
    """Build a Table from one ToTTo-style JSON record.

    Titles default to empty text and ``highlighted_cells`` to none when the
    keys are absent; unknown keys are ignored. Span fields default to 1 and
    ``is_header`` to false so lightly scraped corpora still load.
    """
    if not isinstance(record, dict) or "table" not in record:
        raise MalformedRecord("record has no 'table' field")
    raw_rows = record["table"]
    if not isinstance(raw_rows, list):
        raise MalformedRecord("'table' must be an array of rows")

    rows = []
    for r, raw_row in enumerate(raw_rows):
        if not isinstance(raw_row, list):
            raise MalformedRecord(f"row {r} is not an array")
        row = []
        for i, obj in enumerate(raw_row):
            if not isinstance(obj, dict) or "value" not in obj:
                raise MalformedRecord(f"cell ({r}, {i}) is not an object with a 'value'")
            value = obj["value"]
            if not isinstance(value, str):
                raise MalformedRecord(f"cell ({r}, {i}) value is not text")
            col_span = obj.get("column_span", 1)
            row_span = obj.get("row_span", 1)
            if not isinstance(col_span, int) or not isinstance(row_span, int):
                raise MalformedRecord(f"cell ({r}, {i}) spans are not integers")
            row.append(
                Cell(
                    value=value,
                    col_span=col_span,
                    row_span=row_span,
                    is_header=bool(obj.get("is_header", False)),
                )
            )
        rows.append(tuple(row))

    page_title = record.get("table_page_title", "")
    section_title = record.get("table_section_title", "")
    if not isinstance(page_title, str) or not isinstance(section_title, str):
        raise MalformedRecord("titles must be text")

    raw_hl = record.get("highlighted_cells", [])
    if not isinstance(raw_hl, list):
        raise MalformedRecord("'highlighted_cells' must be an array")
    highlighted = []
    for pair in raw_hl:
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise MalformedRecord(f"highlight {pair!r} is not a [row, cell] pair")
        r, i = pair
        if not (isinstance(r, int) and isinstance(i, int)):
            raise MalformedRecord(f"highlight {pair!r} is not a pair of integers")
        highlighted.append((r, i))

    return Table(
        rows=tuple(rows),
        page_title=page_title,
        section_title=section_title,
        highlighted=tuple(highlighted),
    )


def serialize_table(t: Table) -> dict[str, Any]:
    """Inverse of :func:`parse_table`; emits the full ToTTo-style schema."""
    return {
        "table": [
            [
                {
                    "value": c.value,
                    "column_span": c.col_span,
                    "row_span": c.row_span,
                    "is_header": c.is_header,
                }
                for c in row
            ]
            for row in t.rows
        ],
        "table_page_title": t.page_title,
        "table_section_title": t.section_title,
        "highlighted_cells": [[r, i] for r, i in t.highlighted],
    }


def occupancy_grid(t: Table) -> Grid:
    """Place every cell into a slot grid using HTML placement order.

    Rows are scanned left to right; each cell lands at the leftmost column
    at or after the row cursor where its whole col_span x row_span rectangle
    is free, then claims that rectangle. Searching the full rectangle (not
    just the first slot) is what makes overlap impossible by construction.
    The grid grows downward and rightward as spans demand.
    """
    slots: list[list[CellId | None]] = []
    anchors: dict[CellId, tuple[int, int, int, int]] = {}
    n_cols = 0

    def ensure_rows(n: int) -> None:
        while len(slots) < n:
            slots.append([])

    def free(r: int, c: int) -> bool:
        return r >= len(slots) or c >= len(slots[r]) or slots[r][c] is EMPTY

    for r, row in enumerate(t.rows):
        ensure_rows(r + 1)
        cursor = 0
        for i, cell in enumerate(row):
            cid = (r, i)
            cs, rs = cell.col_span, cell.row_span
            if rs > MAX_GRID_ROWS or cs > MAX_GRID_COLS:
                raise SpanExplosion(f"cell {cid} spans {cs}x{rs}")
            c = cursor
            while not all(
                free(rr, cc)
                for rr in range(r, r + rs)
                for cc in range(c, c + cs)
            ):
                c += 1
                if c + cs > MAX_GRID_COLS:
                    raise SpanExplosion(f"placement of cell {cid} passes {MAX_GRID_COLS} columns")
            if r + rs > MAX_GRID_ROWS:
                raise SpanExplosion(f"placement of cell {cid} passes {MAX_GRID_ROWS} rows")
            ensure_rows(r + rs)
            for rr in range(r, r + rs):
                rowbuf = slots[rr]
                while len(rowbuf) < c + cs:
                    rowbuf.append(EMPTY)
                for cc in range(c, c + cs):
                    rowbuf[cc] = cid
            anchors[cid] = (r, c, rs, cs)
            cursor = c + cs
            n_cols = max(n_cols, c + cs)

    if n_cols > MAX_GRID_COLS or len(slots) > MAX_GRID_ROWS:
        raise SpanExplosion(f"grid is {n_cols} columns x {len(slots)} rows")

    frozen = tuple(tuple(row + [EMPTY] * (n_cols - len(row))) for row in slots)
    return Grid(n_rows=len(slots), n_cols=n_cols, slots=frozen, anchors=anchors)


def related_cells(g: Grid, cell: CellId) -> tuple[list[CellId], list[CellId]]:
    """Cells sharing at least one column (first list) or row (second list).

    Relatedness is set intersection on occupied coordinates, so spanning
    neighbors count once no matter how many slots they share. Both lists
    exclude the query cell and come back sorted by (top_row, left_col).
    """
    if cell not in g.anchors:
        raise UnknownCell(f"cell {cell} is not in this grid")
    top, left, rs, cs = g.anchors[cell]
    cols = range(left, left + cs)
    rows = range(top, top + rs)

    col_related = []
    row_related = []
    for other, (o_top, o_left, o_rs, o_cs) in g.anchors.items():
        if other == cell:
            continue
        if o_left < cols.stop and cols.start < o_left + o_cs:
            col_related.append(other)
        if o_top < rows.stop and rows.start < o_top + o_rs:
            row_related.append(other)

    key = lambda cid: (g.anchors[cid][0], g.anchors[cid][1])
    return sorted(col_related, key=key), sorted(row_related, key=key)


def extract_highlights(t: Table) -> list[Cell]:
    """Highlighted cells in reading order, deduplicated."""
    seen = sorted(set(t.highlighted))
    return [t.cell(ref) for ref in seen]
