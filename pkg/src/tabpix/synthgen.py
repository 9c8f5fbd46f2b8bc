"""Synthetic table generation driven by measured structure distributions.

The generator never copies content from a source corpus: it samples grid
shapes and span patterns from discrete distributions (optionally measured
off a real corpus) and fills cells with short random identifiers. That
gives unlimited structure-learning data whose text carries no meaning.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import EmptyCorpus
from .rng import Rng, mix
from .table import Cell, CellId, Table, occupancy_grid

# Structural caps for generated tables. Measured distributions are clipped
# into these supports, so a generated grid never exceeds them.
MAX_COLS = 20
MAX_ROWS = 75

ALPHABET = string.ascii_uppercase + string.ascii_lowercase + string.digits
VALUE_LEN = 5

_PROB_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteDist:
    """A finite distribution over positive integers.

    Sampling converts one 64-bit draw to a fraction and walks the CDF in
    ascending value order, so a given RNG state yields the same value in
    any port of this code.
    """

    values: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("a distribution needs at least one value")
        if len(self.values) != len(self.probs):
            raise ValueError("values and probs differ in length")
        if list(self.values) != sorted(set(self.values)):
            raise ValueError("values must be strictly increasing")
        if any(v < 1 for v in self.values):
            raise ValueError("values must be >= 1")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be >= 0")
        if abs(sum(self.probs) - 1.0) > _PROB_TOL:
            raise ValueError(f"probabilities sum to {sum(self.probs)}, not 1")

    @classmethod
    def point_mass(cls, v: int) -> "DiscreteDist":
        return cls(values=(v,), probs=(1.0,))

    @classmethod
    def from_counts(cls, counts: dict[int, int]) -> "DiscreteDist":
        total = sum(counts.values())
        if total == 0:
            raise ValueError("no observations")
        values = tuple(sorted(counts))
        return cls(values=values, probs=tuple(counts[v] / total for v in values))

    def sample(self, rng: Rng) -> int:
        u = rng.next_fraction()
        cum = 0.0
        for v, p in zip(self.values, self.probs):
            cum += p
            if u < cum:
                return v
        return self.values[-1]  # float slack at the tail

    def max_value(self) -> int:
        return self.values[-1]


@dataclass(frozen=True)
class StructDist:
    """Everything sample_structure needs: shape, span, and highlight laws."""

    col_count: DiscreteDist
    row_count: DiscreteDist
    col_span: DiscreteDist
    row_span: DiscreteDist
    highlight_count: DiscreteDist = field(default_factory=lambda: DiscreteDist.point_mass(1))

    def __post_init__(self):
        if self.col_count.max_value() > MAX_COLS:
            raise ValueError(f"col_count support exceeds {MAX_COLS}")
        if self.row_count.max_value() > MAX_ROWS:
            raise ValueError(f"row_count support exceeds {MAX_ROWS}")
        if self.col_span.max_value() > MAX_COLS:
            raise ValueError(f"col_span support exceeds {MAX_COLS}")
        if self.row_span.max_value() > MAX_ROWS:
            raise ValueError(f"row_span support exceeds {MAX_ROWS}")

    def to_json(self) -> dict:
        out = {}
        for name in ("col_count", "row_count", "col_span", "row_span", "highlight_count"):
            d: DiscreteDist = getattr(self, name)
            out[name] = {str(v): p for v, p in zip(d.values, d.probs)}
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "StructDist":
        parts = {}
        for name in ("col_count", "row_count", "col_span", "row_span", "highlight_count"):
            if name not in obj:
                raise ValueError(f"distribution file is missing '{name}'")
            mapping = obj[name]
            values = tuple(sorted(int(k) for k in mapping))
            probs = tuple(mapping[str(v)] for v in values)
            parts[name] = DiscreteDist(values=values, probs=probs)
        return cls(**parts)


@dataclass(frozen=True)
class TableSkeleton:
    """A fully tiled grid shape with no content yet.

    ``cells`` holds (top_row, left_col, row_span, col_span) in anchor order,
    which is also creation order: row-major over anchors.
    """

    n_rows: int
    n_cols: int
    cells: tuple[tuple[int, int, int, int], ...]


def default_dist() -> StructDist:
    """A compact, wiki-flavored fallback distribution.

    Shapes skew small with a thin tail out to the caps; spans are mostly 1.
    Used by the CLI when no measured distribution file is given, and by the
    test suite as the fixed published distribution.
    """
    return StructDist(
        col_count=DiscreteDist(
            values=(1, 2, 3, 4, 5, 6, 8, 12, 20),
            probs=(0.05, 0.17, 0.24, 0.2, 0.12, 0.1, 0.06, 0.04, 0.02),
        ),
        row_count=DiscreteDist(
            values=(1, 2, 3, 4, 6, 8, 12, 18, 30, 50, 75),
            probs=(0.06, 0.14, 0.18, 0.16, 0.14, 0.1, 0.09, 0.06, 0.04, 0.02, 0.01),
        ),
        col_span=DiscreteDist(values=(1, 2, 3, 6), probs=(0.9, 0.06, 0.03, 0.01)),
        row_span=DiscreteDist(values=(1, 2, 4), probs=(0.92, 0.06, 0.02)),
        highlight_count=DiscreteDist(values=(1, 2, 3), probs=(0.7, 0.2, 0.1)),
    )


def extract_dist(corpus: Iterable[Table]) -> StructDist:
    """Measure shape and span histograms from real tables.

    Values beyond the structural caps are clipped into the top bin rather
    than dropped, so the measured mass still sums to one. Highlight counts
    are left at the default point mass of one.
    """
    col_counts: dict[int, int] = {}
    row_counts: dict[int, int] = {}
    col_spans: dict[int, int] = {}
    row_spans: dict[int, int] = {}
    n = 0
    for t in corpus:
        n += 1
        g = occupancy_grid(t)
        cc = min(max(g.n_cols, 1), MAX_COLS)
        rc = min(max(g.n_rows, 1), MAX_ROWS)
        col_counts[cc] = col_counts.get(cc, 0) + 1
        row_counts[rc] = row_counts.get(rc, 0) + 1
        for row in t.rows:
            for cell in row:
                cs = min(cell.col_span, MAX_COLS)
                rs = min(cell.row_span, MAX_ROWS)
                col_spans[cs] = col_spans.get(cs, 0) + 1
                row_spans[rs] = row_spans.get(rs, 0) + 1
    if n == 0:
        raise EmptyCorpus("cannot measure a distribution from zero tables")
    return StructDist(
        col_count=DiscreteDist.from_counts(col_counts),
        row_count=DiscreteDist.from_counts(row_counts),
        col_span=DiscreteDist.from_counts(col_spans),
        row_span=DiscreteDist.from_counts(row_spans),
    )


def sample_structure(d: StructDist, rng: Rng) -> TableSkeleton:
    """Draw a grid shape and tile it completely with span rectangles.

    Placement mirrors the table-core occupancy algorithm: scan row-major,
    and at each free slot draw (col_span, row_span), clipping the column
    span to the free run to the right and the row span to the grid bottom.
    Every slot ends up covered, so the result renders with no holes.
    """
    n_cols = d.col_count.sample(rng)
    n_rows = d.row_count.sample(rng)
    occupied = [[False] * n_cols for _ in range(n_rows)]
    cells = []
    for r in range(n_rows):
        c = 0
        while c < n_cols:
            if occupied[r][c]:
                c += 1
                continue
            run = 1
            while c + run < n_cols and not occupied[r][c + run]:
                run += 1
            cs = min(d.col_span.sample(rng), run)
            rs = min(d.row_span.sample(rng), n_rows - r)
            for rr in range(r, r + rs):
                for cc in range(c, c + cs):
                    occupied[rr][cc] = True
            cells.append((r, c, rs, cs))
            c += cs
    return TableSkeleton(n_rows=n_rows, n_cols=n_cols, cells=tuple(cells))


def sample_value(rng: Rng) -> str:
    """Five pairwise-distinct symbols via a partial Fisher-Yates shuffle."""
    pool = list(ALPHABET)
    out = []
    for i in range(VALUE_LEN):
        j = i + rng.below(len(pool) - i)
        pool[i], pool[j] = pool[j], pool[i]
        out.append(pool[i])
    return "".join(out)


def count_value_space() -> int:
    """Number of distinct values sample_value can emit."""
    n = 1
    for i in range(VALUE_LEN):
        n *= len(ALPHABET) - i
    return n


def skeleton_to_table(
    skeleton: TableSkeleton,
    values: Iterable[str],
    *,
    page_title: str = "",
    section_title: str = "",
    highlighted: tuple[CellId, ...] = (),
) -> Table:
    """Group anchor-ordered cells into ragged rows and attach content.

    Rows fully covered by spans from above come out empty, which keeps row
    indices aligned with the skeleton's grid rows.
    """
    rows: list[list[Cell]] = [[] for _ in range(skeleton.n_rows)]
    for (top, _left, rs, cs), value in zip(skeleton.cells, values, strict=True):
        rows[top].append(Cell(value=value, col_span=cs, row_span=rs))
    return Table(
        rows=tuple(tuple(r) for r in rows),
        page_title=page_title,
        section_title=section_title,
        highlighted=highlighted,
    )


def anchor_to_ragged(skeleton: TableSkeleton) -> list[CellId]:
    """Map each anchor-ordered cell to its (row, index) in the ragged table."""
    counts = [0] * skeleton.n_rows
    refs = []
    for top, _left, _rs, _cs in skeleton.cells:
        refs.append((top, counts[top]))
        counts[top] += 1
    return refs


def generate_table(d: StructDist, rng: Rng, table_id: int = 0) -> Table:
    """One complete synthetic table: structure, values, titles, highlights.

    The RNG is consumed in a fixed order (shape, spans, values, highlight
    count, highlight choice) so a single seed pins the whole table.
    """
    skeleton = sample_structure(d, rng)
    values = [sample_value(rng) for _ in skeleton.cells]
    n_cells = len(skeleton.cells)
    k = min(d.highlight_count.sample(rng), n_cells)
    chosen = _choose_distinct(n_cells, k, rng)
    refs = anchor_to_ragged(skeleton)
    highlighted = tuple(refs[i] for i in sorted(chosen))
    return skeleton_to_table(
        skeleton,
        values,
        page_title=f"Synthetic Table {table_id}",
        section_title=f"Section {table_id}",
        highlighted=highlighted,
    )


def _choose_distinct(n: int, k: int, rng: Rng) -> list[int]:
    """k distinct indices from range(n), uniform, via partial Fisher-Yates."""
    pool = list(range(n))
    for i in range(k):
        j = i + rng.below(n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def build_ssl_corpus(
    d: StructDist, sizes: tuple[int, int, int], seed: int
) -> tuple[Iterator[tuple[int, Table]], ...]:
    """Three lazily generated table streams over disjoint index ranges.

    Record i is seeded with mix(seed XOR i), so any record can be produced
    alone, in parallel, or out of order and still match a sequential run.
    Yields (record_index, table) pairs; indices are global across splits.
    """
    n_train, n_val, n_test = sizes
    if min(sizes) < 0:
        raise ValueError("split sizes must be >= 0")

    def stream(start: int, count: int) -> Iterator[tuple[int, Table]]:
        for i in range(start, start + count):
            yield i, generate_table(d, Rng(mix(seed ^ i)), table_id=i)

    return (
        stream(0, n_train),
        stream(n_train, n_val),
        stream(n_train + n_val, n_test),
    )


def load_dist(path) -> StructDist:
    with open(path, "r", encoding="utf-8") as f:
        return StructDist.from_json(json.load(f))


def save_dist(d: StructDist, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(d.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
