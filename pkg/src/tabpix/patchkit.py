"""Fixed-budget patch extraction with deterministic scaling.

An image becomes a sequence of P x P patches; the budget caps how many a
model sees. Two fitting policies exist: fit_resize always rescales so the
whole image fits the budget, while gamma_fit refuses to shrink below a
floor scale and instead truncates columns on the right (then rows at the
bottom in the pathological case), trading content for legibility.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, TruncatedFile
from .render import Image


@dataclass(frozen=True)
class FitConfig:
    max_patches: int = 2048
    patch: int = 16
    gamma: float = 0.39

    def __post_init__(self):
        if self.max_patches < 1 or self.patch < 1:
            raise ValueError("max_patches and patch must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma={self.gamma} is outside [0, 1]")

    def budget_px(self) -> int:
        return self.max_patches * self.patch * self.patch


@dataclass(frozen=True)
class PatchSeq:
    """Row-major patches plus their grid coordinates."""

    patch: int
    grid_rows: int
    grid_cols: int
    patches: tuple[bytes, ...]
    positions: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.patches) != len(self.positions):
            raise ValueError("patches and positions differ in length")


def _resize_to(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Box-filter resample to exact dimensions, bit-exact everywhere.

    Destination pixel j covers the source interval [j*w/w', (j+1)*w/w').
    Scaling coordinates by the destination size makes every boundary an
    integer, so the area-weighted sums stay in int64 and the only rounding
    is the final half-up division. Works for down- and up-scaling.
    """
    h, w = arr.shape
    if (out_w, out_h) == (w, h):
        return arr.copy()

    def axis_pass(a: np.ndarray, n_src: int, n_dst: int) -> np.ndarray:
        # Weighted sums along the last axis, in units of 1/n_dst pixels.
        lo = np.arange(n_dst, dtype=np.int64) * n_src
        hi = lo + n_src
        k_lo = lo // n_dst
        k_hi = (hi - 1) // n_dst
        left_w = (k_lo + 1) * n_dst - lo
        right_w = hi - k_hi * n_dst
        cum = np.zeros((a.shape[0], n_src + 1), dtype=np.int64)
        np.cumsum(a, axis=1, out=cum[:, 1:])
        # The middle term is negative when a destination pixel sits inside
        # one source pixel, and the algebra still comes out exact.
        middle = n_dst * (cum[:, k_hi] - cum[:, k_lo + 1])
        return left_w * a[:, k_lo] + right_w * a[:, k_hi] + middle

    sums = axis_pass(arr.astype(np.int64), w, out_w)
    sums = axis_pass(np.ascontiguousarray(sums.T), h, out_h).T
    denom = w * h
    out = (2 * sums + denom) // (2 * denom)
    return np.clip(out, 0, 255).astype(np.uint8)


def resize(img: Image, s: float) -> Image:
    """Scale both dimensions by s (0 < s <= 1), flooring to at least 1 px."""
    if not 0.0 < s <= 1.0:
        raise ValueError(f"scale {s} is outside (0, 1]")
    out_w = max(1, math.floor(s * img.width))
    out_h = max(1, math.floor(s * img.height))
    return Image.from_array(_resize_to(img.to_array(), out_w, out_h))


def _s_fit(h: int, w: int, cfg: FitConfig) -> float:
    return math.sqrt(cfg.budget_px() / (h * w))


def fit_grid(h: int, w: int, cfg: FitConfig) -> tuple[int, int]:
    """Patch-grid shape fit_resize will target for an h x w image.

    The float formula guarantees rows*cols <= max_patches whenever both
    floors are >= 1; when an extreme aspect ratio floors one side to zero,
    that side is clamped to one patch and the other is capped so the
    budget still holds.
    """
    p = cfg.patch
    s = _s_fit(h, w, cfg)
    rows = math.floor(s * h / p)
    cols = math.floor(s * w / p)
    if rows < 1:
        return 1, max(1, min(cols, cfg.max_patches))
    if cols < 1:
        return max(1, min(rows, cfg.max_patches)), 1
    return rows, cols


def fit_resize(img: Image, cfg: FitConfig) -> tuple[Image, int, int]:
    """Rescale (up or down) so the image exactly tiles its patch grid.

    Returns (image, grid_rows, grid_cols); the image is grid_cols*P wide
    and grid_rows*P tall, so extraction needs no padding and the patch
    count never exceeds the budget.
    """
    rows, cols = fit_grid(img.height, img.width, cfg)
    p = cfg.patch
    out = _resize_to(img.to_array(), cols * p, rows * p)
    return Image.from_array(out), rows, cols


def gamma_fit(img: Image, cfg: FitConfig) -> tuple[Image, float, bool]:
    """Fit the budget without scaling below the gamma floor.

    Small images pass through untouched. Oversized ones scale by
    max(gamma, s_fit): when the pure fit scale wins, this is fit_resize
    and nothing is lost; when gamma wins, the scaled image keeps its
    leftmost columns up to the largest patch-grid width inside the budget
    (and, if a single column of patches still overflows, its topmost
    rows). Returns (image, scale_used, truncated); truncated reports
    whether any pixels were actually cut.
    """
    p = cfg.patch
    h, w = img.height, img.width
    if math.ceil(h / p) * math.ceil(w / p) <= cfg.max_patches:
        return img, 1.0, False

    s_fit = _s_fit(h, w, cfg)
    if cfg.gamma <= s_fit:
        out, _rows, _cols = fit_resize(img, cfg)
        return out, s_fit, False

    s = cfg.gamma
    ws = max(1, math.floor(s * w))
    hs = max(1, math.floor(s * h))
    scaled = _resize_to(img.to_array(), ws, hs)

    rows = math.ceil(hs / p)
    max_cols = cfg.max_patches // rows
    if max_cols >= 1:
        keep_w, keep_h = min(ws, max_cols * p), hs
    else:
        # Pathologically tall: even one column of patches blows the
        # budget, so cut rows as well.
        keep_w = min(ws, p)
        keep_h = min(hs, cfg.max_patches * p)
    truncated = keep_w < ws or keep_h < hs
    out = np.ascontiguousarray(scaled[:keep_h, :keep_w])
    return Image.from_array(out), s, truncated


def extract_patches(img: Image, p: int) -> PatchSeq:
    """Cut into P x P patches, padding right and bottom with white."""
    if p < 1:
        raise ValueError("patch size must be >= 1")
    arr = img.to_array()
    h, w = arr.shape
    rows = -(-h // p)
    cols = -(-w // p)
    padded = np.full((rows * p, cols * p), 255, dtype=np.uint8)
    padded[:h, :w] = arr
    patches = []
    positions = []
    for r in range(rows):
        for c in range(cols):
            patches.append(padded[r * p : (r + 1) * p, c * p : (c + 1) * p].tobytes())
            positions.append((r, c))
    return PatchSeq(
        patch=p,
        grid_rows=rows,
        grid_cols=cols,
        patches=tuple(patches),
        positions=tuple(positions),
    )


_MAGIC = b"TPX1"
_HEADER = struct.Struct("<III")
_POS = struct.Struct("<HH")


def write_patches(seq: PatchSeq, sink) -> None:
    """Serialize to the TPX1 binary layout (path or binary file object)."""
    if hasattr(sink, "write"):
        _write_patches(seq, sink)
    else:
        with open(sink, "wb") as f:
            _write_patches(seq, f)


def _write_patches(seq: PatchSeq, f) -> None:
    f.write(_MAGIC)
    f.write(_HEADER.pack(seq.patch, seq.grid_rows, seq.grid_cols))
    size = seq.patch * seq.patch
    for (r, c), data in zip(seq.positions, seq.patches):
        if r > 0xFFFF or c > 0xFFFF:
            raise ValueError(f"patch position ({r}, {c}) does not fit in 16 bits")
        if len(data) != size:
            raise ValueError("patch byte length does not match the patch size")
        f.write(_POS.pack(r, c))
        f.write(data)


def read_patches(source) -> PatchSeq:
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as f:
            data = f.read()
    if data[:4] != _MAGIC:
        raise BadMagic(f"expected {_MAGIC!r}, found {data[:4]!r}")
    if len(data) < 4 + _HEADER.size:
        raise TruncatedFile("header is incomplete")
    p, rows, cols = _HEADER.unpack_from(data, 4)
    count = rows * cols
    record = _POS.size + p * p
    expected = 4 + _HEADER.size + count * record
    if len(data) != expected:
        raise TruncatedFile(f"expected {expected} bytes, found {len(data)}")
    patches = []
    positions = []
    off = 4 + _HEADER.size
    for _ in range(count):
        r, c = _POS.unpack_from(data, off)
        positions.append((r, c))
        patches.append(data[off + _POS.size : off + record])
        off += record
    return PatchSeq(
        patch=p,
        grid_rows=rows,
        grid_cols=cols,
        patches=tuple(patches),
        positions=tuple(positions),
    )
