"""tabpix: deterministic table-to-image datasets for pixel-based models.

The pipeline turns structured tables into grayscale renderings, cuts them
into fixed-budget patch sequences, and derives self-supervised text
targets describing table structure. Everything is seeded and bit-exact,
so corpora can be regenerated instead of stored.
"""

from .errors import (
    BadHighlight,
    BadK,
    BadMagic,
    BadRange,
    BadSpan,
    EmptyCorpus,
    EmptyInput,
    GrammarError,
    MalformedRecord,
    NoHighlights,
    OversizeImage,
    SpanExplosion,
    TabpixError,
    TruncatedFile,
    UnknownCell,
)
from .patchkit import (
    FitConfig,
    PatchSeq,
    extract_patches,
    fit_grid,
    fit_resize,
    gamma_fit,
    read_patches,
    resize,
    write_patches,
)
from .render import (
    Image,
    RenderConfig,
    Setting,
    measure,
    read_pgm,
    render,
    render_triple,
    write_pgm,
)
from .rng import Rng, mix
from .stats import SizeBuckets, bucket_edges, bucket_of, length_coverage, size_histogram
from .synthgen import (
    DiscreteDist,
    StructDist,
    TableSkeleton,
    build_ssl_corpus,
    count_value_space,
    default_dist,
    extract_dist,
    generate_table,
    sample_structure,
    sample_value,
)
from .table import (
    Cell,
    Grid,
    Table,
    extract_highlights,
    occupancy_grid,
    parse_table,
    related_cells,
    serialize_table,
)
from .targets import (
    MASK_MARKER,
    Container,
    MaskTarget,
    StructureTarget,
    mask_cells,
    parse_structure_target,
    positional_fill,
    structure_target,
    target_token_stats,
    tokenize_target,
)

__version__ = "0.1.0"
