"""Exception types shared across the toolchain.

Every error raised on purpose derives from TabpixError so callers can
catch the whole family at a pipeline boundary without swallowing bugs.
"""

from __future__ import annotations


class TabpixError(Exception):
    """Base class for all errors this package raises deliberately."""


class MalformedRecord(TabpixError):
    """A table record is structurally unusable (missing or ill-typed fields)."""


class BadSpan(TabpixError):
    """A cell declares a column or row span smaller than one."""


class BadHighlight(TabpixError):
    """A highlight index points outside the ragged table."""


class SpanExplosion(TabpixError):
    """Span placement would grow the grid past its hard caps."""


class UnknownCell(TabpixError):
    """A cell identifier is not present in the grid being queried."""


class EmptyCorpus(TabpixError):
    """An operation that needs at least one table got none."""


class EmptyInput(TabpixError):
    """An operation that needs at least one item got an empty sequence."""


class NoHighlights(TabpixError):
    """A table has no highlighted cells but the operation requires one."""


class GrammarError(TabpixError):
    """A structure-target string violates the bracket grammar."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte {byte_offset})")
        self.byte_offset = byte_offset


class BadK(TabpixError):
    """A masking count is outside 1..cell_count."""


class OversizeImage(TabpixError):
    """A raster would exceed the addressable pixel limit."""


class BadMagic(TabpixError):
    """A patch file does not start with the expected magic bytes."""


class TruncatedFile(TabpixError):
    """A patch file ends before its declared contents do."""


class BadRange(TabpixError):
    """Bucket bounds are not a valid positive range."""
