"""Table model: parsing, placement, relatedness, serialization."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabpix import (
    BadHighlight,
    BadSpan,
    Cell,
    MalformedRecord,
    Rng,
    SpanExplosion,
    Table,
    UnknownCell,
    extract_highlights,
    generate_table,
    occupancy_grid,
    parse_table,
    related_cells,
    serialize_table,
)
from tabpix.synthgen import DiscreteDist, StructDist

from oracles import place_naive, related_naive

FLEET_RECORD = {
    "table": [
        [
            {"value": "Aircraft", "column_span": 1, "row_span": 1, "is_header": True},
            {"value": "Total", "column_span": 1, "row_span": 1, "is_header": True},
            {"value": "Orders", "column_span": 1, "row_span": 1, "is_header": True},
            {"value": "Passengers", "column_span": 1, "row_span": 1, "is_header": True},
            {"value": "Operated For", "column_span": 1, "row_span": 1, "is_header": True},
            {"value": "Notes", "column_span": 1, "row_span": 1, "is_header": True},
        ],
        [
            {"value": "Embraer E-170", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "20", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "0", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "70", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "Delta Connection", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "", "column_span": 1, "row_span": 1, "is_header": False},
        ],
        [
            {"value": "Embraer E-175", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "16", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "24", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "76", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "United Express", "column_span": 1, "row_span": 1, "is_header": False},
            {"value": "", "column_span": 1, "row_span": 1, "is_header": False},
        ],
    ],
    "table_page_title": "Shuttle America",
    "table_section_title": "Fleet",
    "highlighted_cells": [[1, 0], [1, 3]],
}


def tbl(*rows, highlighted=()):
    return Table(rows=tuple(tuple(r) for r in rows), highlighted=tuple(highlighted))


def cell(value="x", cs=1, rs=1, header=False):
    return Cell(value=value, col_span=cs, row_span=rs, is_header=header)


class TestParse:
    def test_wiki_fleet_record(self):
        t = parse_table(FLEET_RECORD)
        assert t.page_title == "Shuttle America"
        assert t.section_title == "Fleet"
        assert len(t.rows[0]) == 6
        assert all(c.is_header for c in t.rows[0])
        assert t.rows[1][4].value == "Delta Connection"
        assert t.highlighted == ((1, 0), (1, 3))

    def test_titles_default_empty(self):
        t = parse_table({"table": [[{"value": "a"}]]})
        assert t.page_title == "" and t.section_title == ""
        assert t.highlighted == ()

    def test_highlight_preserved_as_ragged_indices(self):
        t = parse_table(
            {
                "table": [[{"value": "a"}, {"value": "b"}], [{"value": "c"}, {"value": "d"}]],
                "highlighted_cells": [[0, 0]],
            }
        )
        assert t.highlighted == ((0, 0),)

    def test_unknown_keys_ignored(self):
        t = parse_table({"table": [[{"value": "a", "weird": 1}]], "extra": True})
        assert t.rows[0][0].value == "a"

    def test_missing_table_is_malformed(self):
        with pytest.raises(MalformedRecord):
            parse_table({"rows": []})

    def test_empty_table_is_malformed(self):
        with pytest.raises(MalformedRecord):
            parse_table({"table": []})

    def test_newline_in_value_rejected(self):
        with pytest.raises(MalformedRecord):
            parse_table({"table": [[{"value": "a\nb"}]]})

    def test_zero_span_rejected(self):
        with pytest.raises(BadSpan):
            parse_table({"table": [[{"value": "a", "column_span": 0}]]})

    def test_highlight_out_of_range(self):
        with pytest.raises(BadHighlight):
            parse_table({"table": [[{"value": "a"}]], "highlighted_cells": [[0, 5]]})

    def test_serialize_round_trip(self):
        t = parse_table(FLEET_RECORD)
        assert serialize_table(t) == FLEET_RECORD
        assert parse_table(serialize_table(t)) == t


class TestPlacement:
    def test_col_span_fills_second_row_under_it(self):
        t = tbl([cell("A", cs=2)], [cell("B"), cell("C")])
        g = occupancy_grid(t)
        assert g.anchors[(0, 0)] == (0, 0, 1, 2)
        assert g.anchors[(1, 0)] == (1, 0, 1, 1)
        assert g.anchors[(1, 1)] == (1, 1, 1, 1)
        assert (g.n_rows, g.n_cols) == (2, 2)

    def test_row_span_pushes_next_row_right(self):
        t = tbl([cell("A", rs=2), cell("B")], [cell("C")])
        g = occupancy_grid(t)
        assert g.anchors[(1, 0)] == (1, 1, 1, 1)
        assert (g.n_rows, g.n_cols) == (2, 2)

    def test_row_span_extends_grid_below_ragged_rows(self):
        t = tbl([cell("A", rs=3)])
        g = occupancy_grid(t)
        assert g.n_rows == 3
        assert g.slots[2][0] == (0, 0)

    def test_huge_span_explodes(self):
        with pytest.raises(SpanExplosion):
            occupancy_grid(tbl([cell("A", cs=5000)]))

    def test_many_rows_explode(self):
        with pytest.raises(SpanExplosion):
            occupancy_grid(tbl([cell("A", rs=20000)]))

    def test_empty_ragged_row_still_counts(self):
        t = tbl([cell("A", rs=2)], [])
        g = occupancy_grid(t)
        assert g.n_rows == 2


def assert_sound(t: Table, g) -> None:
    """Placement soundness: exact rectangles, no sharing, tight bounds."""
    covered = {}
    for cid, (top, left, rs, cs) in g.anchors.items():
        cell_obj = t.rows[cid[0]][cid[1]]
        assert (rs, cs) == (cell_obj.row_span, cell_obj.col_span)
        for rr in range(top, top + rs):
            for cc in range(left, left + cs):
                assert (rr, cc) not in covered, "two cells share a slot"
                covered[(rr, cc)] = cid
                assert g.slots[rr][cc] == cid
    for r in range(g.n_rows):
        for c in range(g.n_cols):
            if (r, c) not in covered:
                assert g.slots[r][c] is None
    n_cells = sum(len(row) for row in t.rows)
    assert len(g.anchors) == n_cells
    if covered:
        assert g.n_cols == max(c for _, c in covered) + 1
        assert g.n_rows == max(max(r for r, _ in covered) + 1, len(t.rows))
    assert g.n_rows >= len(t.rows)


@st.composite
def ragged_tables(draw):
    n_rows = draw(st.integers(1, 5))
    rows = []
    for _ in range(n_rows):
        n_cells = draw(st.integers(0, 4))
        rows.append(
            tuple(
                Cell(
                    value=draw(st.text(alphabet="abc", max_size=2)),
                    col_span=draw(st.integers(1, 3)),
                    row_span=draw(st.integers(1, 3)),
                )
                for _ in range(n_cells)
            )
        )
    return Table(rows=tuple(rows))


class TestPlacementProperties:
    @given(ragged_tables())
    @settings(max_examples=150, deadline=None)
    def test_soundness_and_oracle_match(self, t):
        g = occupancy_grid(t)
        assert_sound(t, g)
        assert g.anchors == place_naive(t)

    def test_oracle_match_on_seeded_spanned_corpus(self):
        dist = StructDist(
            col_count=DiscreteDist((2, 3, 5), (0.4, 0.4, 0.2)),
            row_count=DiscreteDist((2, 3, 6), (0.4, 0.4, 0.2)),
            col_span=DiscreteDist((1, 2, 3), (0.6, 0.3, 0.1)),
            row_span=DiscreteDist((1, 2), (0.7, 0.3)),
        )
        for i in range(1000):
            t = generate_table(dist, Rng(i), table_id=i)
            g = occupancy_grid(t)
            assert_sound(t, g)
            assert g.anchors == place_naive(t)


class TestRelated:
    def test_plain_grid_neighbors(self):
        t = tbl(
            [cell("a"), cell("b"), cell("c")],
            [cell("d"), cell("e"), cell("f")],
        )
        g = occupancy_grid(t)
        cols, rows = related_cells(g, (1, 1))
        assert cols == [(0, 1)]
        assert rows == [(1, 0), (1, 2)]

    def test_spanning_cell_counts_once(self):
        # "wide" covers columns 0-1; querying it must list both columns'
        # cells, each a single time.
        t = tbl([cell("wide", cs=2)], [cell("x"), cell("y")])
        g = occupancy_grid(t)
        cols, rows = related_cells(g, (0, 0))
        assert cols == [(1, 0), (1, 1)]
        assert rows == []

    def test_unknown_cell(self):
        g = occupancy_grid(tbl([cell("a")]))
        with pytest.raises(UnknownCell):
            related_cells(g, (9, 9))

    @given(ragged_tables())
    @settings(max_examples=100, deadline=None)
    def test_symmetry_and_oracle(self, t):
        g = occupancy_grid(t)
        naive = place_naive(t)
        for cid in g.anchors:
            cols, rows = related_cells(g, cid)
            assert (cols, rows) == related_naive(naive, cid)
            # symmetry: if b is column-related to a, a is column-related to b
            for other in cols:
                assert cid in related_cells(g, other)[0]
            for other in rows:
                assert cid in related_cells(g, other)[1]


class TestHighlights:
    def test_order_and_dedup(self):
        t = tbl(
            [cell("a"), cell("b")],
            [cell("c")],
            highlighted=[(1, 0), (0, 0), (1, 0)],
        )
        assert [c.value for c in extract_highlights(t)] == ["a", "c"]
