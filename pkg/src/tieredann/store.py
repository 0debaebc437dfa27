"""Three-tier vector payload storage.

Tier 1 and tier 2 are bounded in-process caches (FIFO by default,
pluggable). Tier 3 is an external batch-transactional store: either a
simulated-latency in-process backend driven by a deterministic virtual
clock, or a persistent on-disk key-value file. Tier 3 is the source of
truth; the caches are exclusive (an id is never resident in both).
"""

from __future__ import annotations

import struct
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from .errors import (
    MissingPayloadError,
    SnapshotFormatError,
    SnapshotIntegrityError,
    StorageError,
    UndefinedRateError,
)

KV_MAGIC = b"TANS"
KV_VERSION = 1
_KV_HEADER = struct.Struct("<4sII Q")  # magic, version, dimension, item count


class VirtualClock:
    """Deterministic millisecond clock advanced only by simulated work."""

    def __init__(self) -> None:
        self.now_ms = 0.0

    def advance(self, delta_ms: float) -> float:
        self.now_ms += delta_ms
        return self.now_ms


class BatchSignal:
    """Shared completion signal for one in-flight batch request.

    A request transitions pending -> completed or pending -> error exactly
    once. Payloads are published before the state flip, so they are visible
    to the engine as soon as it observes completion. ``poll_count`` counts
    explicit state checks, used to assert the engine never busy-waits.
    """

    PENDING = "pending"
    COMPLETED = "completed"
    ERROR = "error"

    def __init__(self) -> None:
        self._state = self.PENDING
        self._event = threading.Event()
        self.payloads: Optional[Dict[int, np.ndarray]] = None
        self.error: Optional[str] = None
        self.cost_ms = 0.0
        self.poll_count = 0

    def check(self) -> str:
        self.poll_count += 1
        return self._state

    def complete(self, payloads: Dict[int, np.ndarray], cost_ms: float = 0.0) -> None:
        if self._state != self.PENDING:
            raise StorageError("signal completed twice")
        self.payloads = payloads
        self.cost_ms = cost_ms
        self._state = self.COMPLETED
        self._event.set()

    def fail(self, reason: str) -> None:
        if self._state != self.PENDING:
            raise StorageError("signal completed twice")
        self.error = reason
        self._state = self.ERROR
        self._event.set()

    def wait(self, timeout: Optional[float] = None) -> None:
        self._event.wait(timeout)


class SimulatedBackend:
    """In-process tier-3 store charging an affine per-transaction cost.

    Each batch costs ``t_tx_ms + len(batch) * t_item_ms`` on the virtual
    clock; no real time is spent, so benchmarks are deterministic.
    """

    def __init__(self, t_tx_ms: float = 10.0, t_item_ms: float = 0.01):
        if t_tx_ms < 0 or t_item_ms < 0:
            raise ValueError("latency model parameters must be >= 0")
        self.t_tx_ms = t_tx_ms
        self.t_item_ms = t_item_ms
        self.clock = VirtualClock()
        self._data: Dict[int, np.ndarray] = {}

    def put(self, vector_id: int, payload: np.ndarray) -> None:
        self._data[vector_id] = payload

    def contains(self, vector_id: int) -> bool:
        return vector_id in self._data

    def __len__(self) -> int:
        return len(self._data)

    def ids(self) -> Iterable[int]:
        return self._data.keys()

    def estimated_tx_ms(self, n_items: int) -> float:
        return self.t_tx_ms + n_items * self.t_item_ms

    def submit(self, ids: List[int], signal: BatchSignal) -> None:
        try:
            payloads = {i: self._data[i] for i in ids}
        except KeyError as exc:
            signal.fail(f"backend missing id {exc.args[0]}")
            return
        cost = self.estimated_tx_ms(len(ids))
        self.clock.advance(cost)
        signal.complete(payloads, cost_ms=cost)


class DiskBackend:
    """Persistent tier-3 store: fixed-width records in a single file.

    Layout: header (magic ``TANS``, version u32, dimension u32, item count
    u64) followed by records of (id u64 LE, dimension x f32 LE). Appends
    are single-writer; the header count is patched on flush/close.
    """

    def __init__(self, path: str | Path, dimension: int, create: bool = False):
        self.path = Path(path)
        self.dimension = dimension
        self._record_size = 8 + 4 * dimension
        self._offsets: Dict[int, int] = {}
        if create or not self.path.exists():
            self._fh = open(self.path, "w+b")
            self._fh.write(_KV_HEADER.pack(KV_MAGIC, KV_VERSION, dimension, 0))
            self._fh.flush()
        else:
            self._fh = open(self.path, "r+b")
            self._load_header()
        self._lock = threading.Lock()

    def _load_header(self) -> None:
        raw = self._fh.read(_KV_HEADER.size)
        if len(raw) < _KV_HEADER.size:
            raise SnapshotIntegrityError(f"{self.path}: truncated header")
        magic, version, dim, count = _KV_HEADER.unpack(raw)
        if magic != KV_MAGIC:
            raise SnapshotFormatError(f"{self.path}: bad magic {magic!r}")
        if version != KV_VERSION:
            raise SnapshotFormatError(f"{self.path}: unsupported version {version}")
        if dim != self.dimension:
            self.dimension = dim
            self._record_size = 8 + 4 * dim
        for idx in range(count):
            off = _KV_HEADER.size + idx * self._record_size
            self._fh.seek(off)
            rec_id = struct.unpack("<Q", self._fh.read(8))[0]
            self._offsets[rec_id] = off

    def put(self, vector_id: int, payload: np.ndarray) -> None:
        with self._lock:
            if vector_id in self._offsets:
                off = self._offsets[vector_id]
                self._fh.seek(off + 8)
            else:
                self._fh.seek(0, 2)
                off = self._fh.tell()
                self._offsets[vector_id] = off
                self._fh.write(struct.pack("<Q", vector_id))
            self._fh.write(np.asarray(payload, dtype="<f4").tobytes())

    def contains(self, vector_id: int) -> bool:
        return vector_id in self._offsets

    def __len__(self) -> int:
        return len(self._offsets)

    def ids(self) -> Iterable[int]:
        return self._offsets.keys()

    def flush(self) -> None:
        with self._lock:
            self._fh.seek(0)
            self._fh.write(
                _KV_HEADER.pack(KV_MAGIC, KV_VERSION, self.dimension, len(self._offsets))
            )
            self._fh.flush()

    def close(self) -> None:
        self.flush()
        self._fh.close()

    def submit(self, ids: List[int], signal: BatchSignal) -> None:
        start = time.perf_counter()
        payloads: Dict[int, np.ndarray] = {}
        with self._lock:
            for vector_id in ids:
                off = self._offsets.get(vector_id)
                if off is None:
                    signal.fail(f"backend missing id {vector_id}")
                    return
                self._fh.seek(off + 8)
                raw = self._fh.read(4 * self.dimension)
                payloads[vector_id] = np.frombuffer(raw, dtype="<f4").copy()
        signal.complete(payloads, cost_ms=(time.perf_counter() - start) * 1e3)


class FifoPolicy:
    """Evict in insertion order; hits do not reorder."""

    def on_hit(self, cache: "BoundedCache", key: int) -> None:
        pass


class LruPolicy:
    """Evict the least recently used entry; hits refresh recency."""

    def on_hit(self, cache: "BoundedCache", key: int) -> None:
        cache.data.move_to_end(key)


class BoundedCache:
    """Item-count-bounded mapping with a pluggable eviction policy."""

    def __init__(self, capacity: int, policy=None):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self.policy = policy or FifoPolicy()
        self.data: "OrderedDict[int, np.ndarray]" = OrderedDict()

    def __contains__(self, key: int) -> bool:
        return key in self.data

    def __len__(self) -> int:
        return len(self.data)

    def get(self, key: int) -> np.ndarray:
        value = self.data[key]
        self.policy.on_hit(self, key)
        return value

    def pop(self, key: int) -> np.ndarray:
        return self.data.pop(key)

    def put(self, key: int, value: np.ndarray, on_evict: Optional[Callable] = None) -> None:
        if self.capacity == 0:
            return
        if key in self.data:
            self.data[key] = value
            return
        while len(self.data) >= self.capacity:
            old_key, old_val = self.data.popitem(last=False)
            if on_evict is not None:
                on_evict(old_key, old_val)
        self.data[key] = value

    def resize(self, capacity: int, on_evict: Optional[Callable] = None) -> None:
        self.capacity = capacity
        while len(self.data) > capacity:
            old_key, old_val = self.data.popitem(last=False)
            if on_evict is not None:
                on_evict(old_key, old_val)

    def clear(self) -> None:
        self.data.clear()


@dataclass
class StoreStats:
    """Monotone counters for one measurement session."""

    n_db: int = 0
    items_fetched: int = 0
    hits_t1: int = 0
    hits_t2: int = 0
    t_db_total_ms: float = 0.0
    evaluated_fetched: int = 0
    pending_fetched: set = field(default_factory=set)

    def snapshot(self) -> tuple:
        return (self.n_db, self.items_fetched, self.hits_t1, self.hits_t2,
                self.t_db_total_ms)


class FetchRecorder:
    """Per-query instrumentation: which ids each transaction fetched."""

    def __init__(self) -> None:
        self.transactions: List[List[int]] = []
        self.fetched: set = set()
        self.evaluated: set = set()

    def on_fetch(self, ids: List[int]) -> None:
        self.transactions.append(list(ids))
        self.fetched.update(ids)

    def note_evaluated(self, ids: Iterable[int]) -> None:
        self.evaluated.update(ids)

    @property
    def unused_fetched(self) -> set:
        return self.fetched - self.evaluated


class TieredVectorStore:
    """get()/store() surface over the three-tier hierarchy.

    Lookup order is tier 1 -> tier 2 -> tier 3; all tier-3 misses of one
    ``get_batch`` call are fetched in exactly one transaction through the
    rendezvous contract (``request_batch`` / ``await_completion``). Fetched
    and tier-2-hit items are promoted into tier 1; tier-1 evictions fall
    into tier 2; tier-2 evictions are dropped (tier 3 is write-through).
    """

    def __init__(self, backend, tier1_capacity: int, tier2_capacity: int,
                 split_ratio: float = 0.5, policy_factory=FifoPolicy):
        self.backend = backend
        self.split_ratio = split_ratio
        self._policy_factory = policy_factory
        self.tier1 = BoundedCache(tier1_capacity, policy_factory())
        self.tier2 = BoundedCache(tier2_capacity, policy_factory())
        self.stats = StoreStats()
        self.recorder: Optional[FetchRecorder] = None
        self._stats_lock = threading.Lock()

    # -- write path ------------------------------------------------------

    def put(self, vector_id: int, payload: np.ndarray) -> None:
        """Write-through insert: tier 3 always, tier 1 as a warm copy."""
        payload = np.ascontiguousarray(payload, dtype=np.float32)
        self.backend.put(vector_id, payload)
        if vector_id in self.tier2:
            self.tier2.pop(vector_id)
        self.tier1.put(vector_id, payload, on_evict=self.evict_store)

    def evict_store(self, vector_id: int, payload: np.ndarray) -> None:
        """Receive a tier-1 eviction into tier 2 (drop on tier-2 overflow)."""
        self.tier2.put(vector_id, payload)

    # -- read path -------------------------------------------------------

    def is_resident(self, vector_id: int) -> bool:
        return vector_id in self.tier1 or vector_id in self.tier2

    def get_batch(self, ids: Iterable[int]) -> Dict[int, np.ndarray]:
        out: Dict[int, np.ndarray] = {}
        missing: List[int] = []
        missing_set: set = set()
        t1, t2 = self.tier1, self.tier2
        hits_t1 = hits_t2 = 0
        for vector_id in ids:
            if vector_id in missing_set:
                continue
            if vector_id in t1:
                out[vector_id] = t1.get(vector_id)
                hits_t1 += 1
            elif vector_id in t2:
                payload = t2.pop(vector_id)
                t1.put(vector_id, payload, on_evict=self.evict_store)
                out[vector_id] = payload
                hits_t2 += 1
            else:
                missing.append(vector_id)
                missing_set.add(vector_id)
        with self._stats_lock:
            self.stats.hits_t1 += hits_t1
            self.stats.hits_t2 += hits_t2
        if missing:
            for vector_id in missing:
                if not self.backend.contains(vector_id):
                    raise MissingPayloadError(vector_id)
            signal = self.request_batch(missing)
            payloads = self.await_completion(signal)
            with self._stats_lock:
                self.stats.n_db += 1
                self.stats.items_fetched += len(missing)
                self.stats.t_db_total_ms += signal.cost_ms
                self.stats.pending_fetched.update(missing)
            if self.recorder is not None:
                self.recorder.on_fetch(missing)
            for vector_id in missing:
                payload = payloads[vector_id]
                out[vector_id] = payload
                self.tier1.put(vector_id, payload, on_evict=self.evict_store)
        return out

    # -- rendezvous contract ---------------------------------------------

    def request_batch(self, ids: List[int]) -> BatchSignal:
        signal = BatchSignal()
        self.backend.submit(ids, signal)
        return signal

    def await_completion(self, signal: BatchSignal) -> Dict[int, np.ndarray]:
        state = signal.check()
        if state == BatchSignal.PENDING:
            # Suspend on the event; no spin loop. One more check after wake.
            signal.wait()
            state = signal.check()
        if state == BatchSignal.ERROR:
            raise StorageError(signal.error)
        assert signal.payloads is not None
        return signal.payloads

    # -- instrumentation ---------------------------------------------------

    def note_evaluated(self, ids: Iterable[int]) -> None:
        """Mark fetched ids as distance-evaluated (lazy-mode redundancy)."""
        ids = list(ids)
        if self.recorder is not None:
            self.recorder.note_evaluated(ids)
        with self._stats_lock:
            pending = self.stats.pending_fetched
            for vector_id in ids:
                if vector_id in pending:
                    pending.discard(vector_id)
                    self.stats.evaluated_fetched += 1

    def redundancy_rate(self, prefetch_size: Optional[int] = None) -> float:
        """Share of externally loaded data that went unused.

        With a fixed ``prefetch_size``, this is
        ``1 - hits / (n_db * prefetch_size)``; without one (lazy mode) it is
        ``1 - evaluated_fetched / items_fetched``.
        """
        stats = self.stats
        if stats.n_db == 0:
            raise UndefinedRateError("no external transactions recorded")
        if prefetch_size is not None:
            hits = stats.hits_t1 + stats.hits_t2
            return 1.0 - hits / (stats.n_db * prefetch_size)
        return 1.0 - stats.evaluated_fetched / stats.items_fetched

    # -- budget control ----------------------------------------------------

    @property
    def total_budget(self) -> int:
        return self.tier1.capacity + self.tier2.capacity

    def set_budget(self, total_items: int, split_ratio: Optional[float] = None) -> None:
        """Re-divide a combined item budget across tier 1 and tier 2."""
        if total_items < 0:
            raise ValueError("budget must be >= 0")
        if split_ratio is not None:
            self.split_ratio = split_ratio
        t1_cap = max(1, int(round(total_items * self.split_ratio))) if total_items else 0
        t1_cap = min(t1_cap, total_items)
        self.tier1.resize(t1_cap, on_evict=self.evict_store)
        self.tier2.resize(total_items - t1_cap)

    def clear_caches(self) -> None:
        self.tier1.clear()
        self.tier2.clear()

    def reset_stats(self) -> None:
        self.stats = StoreStats()
