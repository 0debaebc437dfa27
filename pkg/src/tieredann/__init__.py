"""Storage-aware approximate nearest neighbor search.

HNSW graph search over a three-tier cache/storage hierarchy with phased
lazy loading of vector payloads and heuristic cache-size optimization.
"""

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    IngestError,
    InvalidVectorError,
    MissingPayloadError,
    MissingTextError,
    ResidencyContractError,
    SnapshotFormatError,
    SnapshotIntegrityError,
    StorageError,
    TieredAnnError,
    UndefinedRateError,
    UnknownIdError,
)
from .hnsw import HnswIndex, SearchParams, SearchResult, distance
from .ingest import TextStore, ingest_stream, load_index, save_index
from .lazy import QueryStats, ensure_resident, search_lazy, search_layer_lazy
from .optimizer import (
    OptimizerParams,
    OptimizerResult,
    OptimizerState,
    QueryTestReport,
    check_rollback,
    get_theta,
    optimize_memory_size,
    predict_ndb_optimal,
    predict_ndb_random,
)
from .store import (
    BatchSignal,
    DiskBackend,
    FetchRecorder,
    SimulatedBackend,
    TieredVectorStore,
    VirtualClock,
)

__version__ = "0.1.0"
