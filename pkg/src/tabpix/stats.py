"""Corpus statistics: geometric size buckets and length coverage.

Rendered-table sizes span several orders of magnitude, so buckets are
geometric. Edges are computed through 40-digit decimal arithmetic and then
rounded, which pins the endpoints exactly and keeps adjacent edge ratios
as constant as binary64 allows (adjacent ratios of correctly rounded
edges can still differ by a couple of ulps on unlucky ranges).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from typing import Iterable

from .errors import BadRange, EmptyCorpus, EmptyInput
from .render import RenderConfig, Setting, measure
from .table import Table

DEFAULT_BUCKETS = 20
DEFAULT_BUDGET_PX = 2048 * 16 * 16


@dataclass(frozen=True)
class SizeBuckets:
    lo: float
    hi: float
    k: int
    edges: tuple[float, ...]


def bucket_edges(lo: float, hi: float, k: int) -> SizeBuckets:
    """k geometric buckets spanning [lo, hi]; k+1 strictly increasing edges."""
    if not (0 < lo < hi) or not math.isfinite(lo) or not math.isfinite(hi):
        raise BadRange(f"need 0 < lo < hi, got lo={lo} hi={hi}")
    if k < 1:
        raise BadRange(f"need k >= 1, got k={k}")
    with localcontext() as ctx:
        ctx.prec = 40
        dlo, dhi = Decimal(lo), Decimal(hi)
        edges = []
        for i in range(k + 1):
            t = Decimal(i) / Decimal(k)
            edges.append(float(dlo ** (1 - t) * dhi ** t))
    edges[0], edges[k] = lo, hi
    for i in range(k):
        if not edges[i] < edges[i + 1]:
            raise BadRange(f"range [{lo}, {hi}] is too tight for {k} buckets")
    return SizeBuckets(lo=lo, hi=hi, k=k, edges=tuple(edges))


def bucket_of(size: float, b: SizeBuckets) -> int:
    """Bucket index for a size, clamped into 0..k-1.

    Uses the closed-form log position rather than an edge scan, so lookup
    is O(1) and weakly monotone in size.
    """
    if size <= 0 or not math.isfinite(size):
        raise BadRange(f"size must be positive and finite, got {size}")
    i = math.floor(b.k * (math.log(size) - math.log(b.lo)) / (math.log(b.hi) - math.log(b.lo)))
    return min(max(i, 0), b.k - 1)


def size_histogram(
    corpus: Iterable[Table],
    cfg: RenderConfig,
    *,
    k: int = DEFAULT_BUCKETS,
    budget_px: int = DEFAULT_BUDGET_PX,
) -> dict:
    """Distribution of rendered pixel counts, measured without rasterizing.

    Sizes come from measure() under the opene setting (the largest view a
    model sees). Proportions sum to one over the bucket vector; the
    oversize fraction counts tables past the patch-budget pixel area.
    """
    sizes = []
    for t in corpus:
        w, h = measure(t, cfg, Setting.OPENE)
        sizes.append(w * h)
    if not sizes:
        raise EmptyCorpus("cannot build a histogram from zero tables")

    lo, hi = float(min(sizes)), float(max(sizes))
    if lo == hi:
        hi = lo * 2.0  # degenerate corpus: every size lands in bucket 0
    buckets = bucket_edges(lo, hi, k)
    counts = [0] * k
    for size in sizes:
        counts[bucket_of(size, buckets)] += 1
    n = len(sizes)
    return {
        "edges": list(buckets.edges),
        "proportions": [c / n for c in counts],
        "oversize_fraction": sum(1 for s in sizes if s > budget_px) / n,
        "n": n,
    }


def length_coverage(lengths: Iterable[int], cap: int) -> float:
    """Fraction of token counts that fit within a model's length cap."""
    total = 0
    fit = 0
    for n in lengths:
        total += 1
        if n <= cap:
            fit += 1
    if total == 0:
        raise EmptyInput("no lengths to measure")
    return fit / total
