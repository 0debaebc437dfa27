"""Layer search with phased lazy loading.

Payload misses are deferred into a list L instead of being fetched one by
one. L is flushed in a single batched transaction either when it outgrows
the ef parameter (intra-layer) or when the in-memory search of the layer
runs out of candidates (inter-layer), and the search resumes with the
loaded items admitted as candidates. The loop repeats until a layer search
finishes with L empty, which guarantees correct entry points for the next
layer while fetching only payloads the query actually evaluates.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from .errors import ResidencyContractError, UnknownIdError
from .hnsw import HnswIndex, SearchParams, SearchResult, as_embedding, distance_batch
from .store import FetchRecorder, TieredVectorStore


@dataclass
class QueryStats:
    """Per-query accounting for one lazy search."""

    n_q: int = 0            # distinct items visited (evaluated or deferred)
    n_db: int = 0           # external transactions
    items_fetched: int = 0  # payloads loaded from tier 3
    storage_ms: float = 0.0  # simulated (or measured) external-access time
    compute_ms: float = 0.0  # wall-clock engine time
    distance_ms: float = 0.0  # wall-clock time inside distance kernels
    fetched_ids: Set[int] = field(default_factory=set)
    evaluated_fetched_ids: Set[int] = field(default_factory=set)

    @property
    def t_query_ms(self) -> float:
        return self.compute_ms + self.storage_ms

    @property
    def t_db_ms(self) -> float:
        return self.storage_ms / self.n_db if self.n_db else 0.0


class _Timing:
    __slots__ = ("distance_ms",)

    def __init__(self) -> None:
        self.distance_ms = 0.0


def _evaluate(q: np.ndarray, ids: List[int], payloads: Dict[int, np.ndarray],
              metric: str, timing: Optional[_Timing]) -> np.ndarray:
    if timing is None:
        return distance_batch(q, [payloads[e] for e in ids], metric)
    t0 = time.perf_counter()
    dists = distance_batch(q, [payloads[e] for e in ids], metric)
    timing.distance_ms += (time.perf_counter() - t0) * 1e3
    return dists


def ensure_resident(ids: Iterable[int], store: TieredVectorStore) -> Dict[int, np.ndarray]:
    """Make payloads readable now; at most one tier-3 transaction."""
    return store.get_batch(list(ids))


def search_layer_lazy(
    index: HnswIndex, q, ep: Iterable[int], ef: int, lc: int,
    store: TieredVectorStore, timing: Optional[_Timing] = None,
) -> Tuple[List[Tuple[int, float]], Set[int]]:
    """One-layer search with deferred batched loading.

    Returns (up to ef nearest (id, distance) pairs, visited id set).
    Entry-point payloads must be resident; callers guarantee this via
    :func:`ensure_resident`.
    """
    q = as_embedding(q, index.dimension)
    adjacency = index.layers[lc]
    ep = sorted(set(int(e) for e in ep))
    for e in ep:
        if e not in adjacency:
            raise UnknownIdError(f"id {e} does not exist at level {lc}")
        if not store.is_resident(e):
            raise ResidencyContractError(f"entry point {e} is not resident")

    payloads = store.get_batch(ep)
    dists = _evaluate(q, ep, payloads, index.metric, timing)
    store.note_evaluated(ep)

    visited: Set[int] = set(ep)
    candidates: List[Tuple[float, int]] = []  # min-heap
    results: List[Tuple[float, int]] = []  # max-heap via negation
    for e, d in zip(ep, dists):
        d = float(d)
        heapq.heappush(candidates, (d, e))
        heapq.heappush(results, (-d, -e))
    while len(results) > ef:
        heapq.heappop(results)

    deferred: List[int] = []  # the list L
    is_resident = store.is_resident

    def admit(e: int, d: float) -> None:
        if len(results) < ef or d < -results[0][0]:
            heapq.heappush(candidates, (d, e))
            heapq.heappush(results, (-d, -e))
            if len(results) > ef:
                heapq.heappop(results)

    while True:
        while candidates:
            c_dist, c = heapq.heappop(candidates)
            if c_dist > -results[0][0] and len(results) >= ef:
                break
            fresh = [e for e in adjacency[c] if e not in visited]
            if fresh:
                visited.update(fresh)
                resident = []
                for e in fresh:
                    if is_resident(e):
                        resident.append(e)
                    else:
                        deferred.append(e)
                if resident:
                    payloads = store.get_batch(resident)
                    dists = _evaluate(q, resident, payloads, index.metric, timing)
                    store.note_evaluated(resident)
                    for e, d in zip(resident, dists):
                        admit(e, float(d))
            if len(deferred) > ef:
                break  # intra-layer flush

        if deferred:
            # One batched transaction loads everything deferred so far.
            payloads = store.get_batch(deferred)
            loaded = sorted(deferred)
            dists = _evaluate(q, loaded, payloads, index.metric, timing)
            store.note_evaluated(loaded)
            for e, d in zip(loaded, dists):
                admit(e, float(d))
            deferred = []
        else:
            break

    out = [(-e, -d) for d, e in results]
    out.sort(key=lambda t: (t[1], t[0]))
    return [(e, d) for e, d in out], visited


def search_lazy(
    index: HnswIndex, q, params: SearchParams, store: TieredVectorStore,
    text_store=None,
) -> Tuple[List[SearchResult], QueryStats]:
    """Full query with phased lazy loading at every layer.

    Entry points of each layer pass through :func:`ensure_resident` before
    the layer search. Returns the top-k results and per-query stats.
    """
    stats = QueryStats()
    if index.entry_point is None:
        return [], stats
    q = as_embedding(q, index.dimension)

    recorder = FetchRecorder()
    prev_recorder = store.recorder
    store.recorder = recorder
    before = store.stats.snapshot()
    timing = _Timing()
    t0 = time.perf_counter()
    try:
        ep = [index.entry_point]
        visited_total: Set[int] = set()
        for lc in range(index.max_level, 0, -1):
            ensure_resident(ep, store)
            found, visited = search_layer_lazy(index, q, ep, 1, lc, store,
                                               timing=timing)
            visited_total |= visited
            ep = [found[0][0]]
        ensure_resident(ep, store)
        found, visited = search_layer_lazy(index, q, ep, params.ef, 0, store,
                                           timing=timing)
        visited_total |= visited
    finally:
        store.recorder = prev_recorder
    wall_ms = (time.perf_counter() - t0) * 1e3

    after = store.stats.snapshot()
    stats.n_q = len(visited_total)
    stats.n_db = after[0] - before[0]
    stats.items_fetched = after[1] - before[1]
    stats.storage_ms = after[4] - before[4]
    stats.compute_ms = wall_ms
    stats.distance_ms = timing.distance_ms
    stats.fetched_ids = recorder.fetched
    stats.evaluated_fetched_ids = recorder.evaluated & recorder.fetched

    results = []
    for vid, d in found[: params.k]:
        text = text_store.get_text(vid) if text_store is not None else None
        results.append(SearchResult(vid, d, text))
    return results, stats
