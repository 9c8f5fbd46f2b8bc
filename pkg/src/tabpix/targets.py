"""Self-supervised targets: bracketed structure descriptions and cell masking.

The structure objective asks a model to emit, for each highlighted cell,
the cell's value plus the values of every cell sharing one of its columns
or rows. Targets use a tiny bracket grammar so they stay parseable:

    Target    := Container+
    Container := "<" Head " " "<" ColCells ">" " " "<" RowCells ">" ">"

Cell values are escaped so space, "<", ">", and backslash survive a round
trip through the grammar.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import BadK, EmptyInput, GrammarError, NoHighlights
from .rng import Rng
from .synthgen import TableSkeleton, _choose_distinct, skeleton_to_table
from .table import Cell, Grid, Table, occupancy_grid, related_cells

MASK_MARKER = "▮"

_ESCAPED = {" ", "<", ">", "\\"}


@dataclass(frozen=True)
class Container:
    """One highlighted cell's description: its value plus related values."""

    head: str
    col_cells: tuple[str, ...]
    row_cells: tuple[str, ...]


@dataclass(frozen=True)
class StructureTarget:
    text: str
    containers: tuple[Container, ...]


@dataclass(frozen=True)
class MaskTarget:
    """A table with k cell values blanked and the answer that restores them."""

    masked_table: Table
    answer: str


def _escape(value: str) -> str:
    out = []
    for ch in value:
        if ch in _ESCAPED:
            out.append("\\")
        out.append(ch)
    return "".join(out)


def structure_target(t: Table, grid: Grid | None = None) -> StructureTarget:
    """One container per highlighted cell, in anchor order.

    Each container lists the head value, then values of all cells sharing
    one of the head's columns, then values of all cells sharing one of its
    rows; both lists are anchor-ordered and exclude the head itself.
    """
    if not t.highlighted:
        raise NoHighlights("structure targets need at least one highlighted cell")
    g = grid if grid is not None else occupancy_grid(t)

    # Ragged (row, index) order coincides with anchor order: a cell's top
    # row is its ragged row, and the placement cursor moves left to right.
    heads = sorted(set(t.highlighted))

    containers = []
    parts = []
    for ref in heads:
        head = t.cell(ref).value
        col_ids, row_ids = related_cells(g, ref)
        col_vals = tuple(t.cell(c).value for c in col_ids)
        row_vals = tuple(t.cell(c).value for c in row_ids)
        containers.append(Container(head=head, col_cells=col_vals, row_cells=row_vals))
        parts.append(
            "<{} <{}> <{}>>".format(
                _escape(head),
                " ".join(_escape(v) for v in col_vals),
                " ".join(_escape(v) for v in row_vals),
            )
        )
    return StructureTarget(text="".join(parts), containers=tuple(containers))


class _Parser:
    """Recursive-descent reader for the bracket grammar."""

    def __init__(self, text: str):
        self.text = text
        self.i = 0

    def fail(self, message: str):
        offset = len(self.text[: self.i].encode("utf-8"))
        raise GrammarError(message, byte_offset=offset)

    def peek(self) -> str | None:
        return self.text[self.i] if self.i < len(self.text) else None

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            self.fail(f"expected {ch!r}, found {self.peek()!r}")
        self.i += 1

    def value(self) -> str:
        # A value runs until an unescaped space or bracket. Backslash
        # escapes the next character, whatever it is.
        out = []
        while True:
            ch = self.peek()
            if ch is None or ch in (" ", "<", ">"):
                return "".join(out)
            if ch == "\\":
                self.i += 1
                nxt = self.peek()
                if nxt is None:
                    self.fail("escape at end of input")
                out.append(nxt)
                self.i += 1
            else:
                out.append(ch)
                self.i += 1

    def cell_list(self) -> tuple[str, ...]:
        self.expect("<")
        if self.peek() == ">":
            self.i += 1
            return ()
        vals = [self.value()]
        while True:
            ch = self.peek()
            if ch == ">":
                self.i += 1
                return tuple(vals)
            if ch == " ":
                self.i += 1
                vals.append(self.value())
            else:
                self.fail(f"expected ' ' or '>', found {ch!r}")

    def container(self) -> Container:
        self.expect("<")
        head = self.value()
        self.expect(" ")
        cols = self.cell_list()
        self.expect(" ")
        rows = self.cell_list()
        self.expect(">")
        return Container(head=head, col_cells=cols, row_cells=rows)


def parse_structure_target(text: str) -> tuple[Container, ...]:
    """Parse a target string back into containers.

    Raises GrammarError (with a byte offset) on the first violation. Note
    the grammar cannot represent an empty-string value inside a cell list,
    so round-tripping is exact only for non-empty values.
    """
    p = _Parser(text)
    if p.peek() is None:
        p.fail("empty target")
    containers = []
    while p.peek() is not None:
        containers.append(p.container())
    return tuple(containers)


def positional_fill(skeleton: TableSkeleton) -> Table:
    """Fill a skeleton with values that name their own anchor position.

    A cell anchored at grid (r, c) gets the value "R{r}C{c}", which turns
    value recovery into a pure geometry task.
    """
    values = [f"R{top}C{left}" for top, left, _rs, _cs in skeleton.cells]
    return skeleton_to_table(skeleton, values)


def mask_cells(t: Table, k: int, rng: Rng) -> MaskTarget:
    """Blank k distinct cells and record the values needed to restore them.

    Cells are chosen uniformly; the answer lists the original values in
    anchor order, space-separated. k must be in 1..cell_count.
    """
    g = occupancy_grid(t)
    order = sorted(g.anchors, key=lambda cid: (g.anchors[cid][0], g.anchors[cid][1]))
    n = len(order)
    if not 1 <= k <= n:
        raise BadK(f"k={k} is outside 1..{n}")
    chosen = sorted(_choose_distinct(n, k, rng))
    masked_refs = {order[i] for i in chosen}
    answer = " ".join(t.cell(order[i]).value for i in chosen)

    rows = []
    for r, row in enumerate(t.rows):
        new_row = []
        for i, cell in enumerate(row):
            if (r, i) in masked_refs:
                cell = Cell(
                    value=MASK_MARKER,
                    col_span=cell.col_span,
                    row_span=cell.row_span,
                    is_header=cell.is_header,
                )
            new_row.append(cell)
        rows.append(tuple(new_row))
    masked = Table(
        rows=tuple(rows),
        page_title=t.page_title,
        section_title=t.section_title,
        highlighted=t.highlighted,
    )
    return MaskTarget(masked_table=masked, answer=answer)


def tokenize_target(text: str) -> list[str]:
    """Whitespace-and-bracket-delimited units; each bracket is its own token."""
    tokens = []
    buf: list[str] = []

    def flush():
        if buf:
            tokens.append("".join(buf))
            buf.clear()

    for ch in text:
        if ch in "<>":
            flush()
            tokens.append(ch)
        elif ch.isspace():
            flush()
        else:
            buf.append(ch)
    flush()
    return tokens


def target_token_stats(targets: Iterable[str]) -> tuple[float, int]:
    """(mean, max) token count over a target corpus."""
    total = 0
    count = 0
    longest = 0
    for text in targets:
        n = len(tokenize_target(text))
        total += n
        count += 1
        longest = max(longest, n)
    if count == 0:
        raise EmptyInput("no targets to measure")
    return total / count, longest
