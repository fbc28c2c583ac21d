"""Storage engine for adaptive-mesh-refinement simulation output.

The pieces, bottom-up: a boolean-array tree model (`tree`), run-length
text for booleans (`boolcodec`), a lossless float64 delta codec
(`deltacodec`), ghost-subtree pruning (`pruning`), an aggregated on-disk
database (`container`), synthetic mesh generation and domain
decomposition (`synthgen`), a write benchmark (`bench`) and a CLI
(`cli`).
"""

from .bench import BenchConfig, BenchReport, emit_csv, run_write_bench
from .boolcodec import BoolCodecStats, bool_stats, decode_bools, encode_bools
from .container import (
    AmrObjectPayload,
    Database,
    DbParams,
    IndexEntry,
    create_db,
    open_db,
)
from .curves import hilbert_key, morton_key
from .deltacodec import (
    CompressedField,
    DeltaStats,
    compress_field,
    decompress_field,
    decompress_to_level,
    delta_stats,
    stream_prefix_bits,
)
from .errors import (
    AlreadyExists,
    AmrStoreError,
    ConfigInvalid,
    ContextMismatch,
    CorruptRecord,
    DatabaseError,
    DuplicateEntry,
    InconsistentDomains,
    InvalidGenSpec,
    InvalidHeaderWidth,
    KindMismatch,
    LengthMismatch,
    MalformedEncoding,
    MalformedTree,
    NotADatabase,
    NotFound,
    OwnershipConflict,
    StreamTruncated,
    TooManyDomains,
)
from .pruning import PruneStats, prune_domain
from .synthgen import (
    FIELD_NAMES,
    GenSpec,
    GhostPolicy,
    RandomRule,
    ShellRule,
    assemble,
    assign_owners,
    decompose,
    generate_global,
)
from .tree import (
    AmrTree,
    CellGeometry,
    DomainTree,
    GlobalTree,
    Violation,
    build_tree,
    cell_geometry,
    children_of,
    father_of,
    node_level,
    node_levels,
    validate_domain,
)

__version__ = "0.1.0"

__all__ = [
    "AlreadyExists",
    "AmrObjectPayload",
    "AmrStoreError",
    "AmrTree",
    "BenchConfig",
    "BenchReport",
    "BoolCodecStats",
    "CellGeometry",
    "CompressedField",
    "ConfigInvalid",
    "ContextMismatch",
    "CorruptRecord",
    "Database",
    "DatabaseError",
    "DbParams",
    "DeltaStats",
    "DomainTree",
    "DuplicateEntry",
    "FIELD_NAMES",
    "GenSpec",
    "GhostPolicy",
    "GlobalTree",
    "InconsistentDomains",
    "IndexEntry",
    "InvalidGenSpec",
    "InvalidHeaderWidth",
    "KindMismatch",
    "LengthMismatch",
    "MalformedEncoding",
    "MalformedTree",
    "NotADatabase",
    "NotFound",
    "OwnershipConflict",
    "PruneStats",
    "RandomRule",
    "ShellRule",
    "StreamTruncated",
    "TooManyDomains",
    "Violation",
    "assemble",
    "assign_owners",
    "bool_stats",
    "build_tree",
    "cell_geometry",
    "children_of",
    "compress_field",
    "create_db",
    "decode_bools",
    "decompose",
    "decompress_field",
    "decompress_to_level",
    "delta_stats",
    "emit_csv",
    "encode_bools",
    "father_of",
    "generate_global",
    "hilbert_key",
    "morton_key",
    "node_level",
    "node_levels",
    "open_db",
    "prune_domain",
    "run_write_bench",
    "stream_prefix_bits",
    "validate_domain",
]
