"""Hierarchical navigable small world graph: build and baseline query.

Topology (adjacency lists per level) is always memory-resident; vector
payloads live in a :class:`~tieredann.store.TieredVectorStore`. The layer
search here is the canonical greedy best-first variant; the phased-lazy
extension lives in :mod:`tieredann.lazy`.

All tie-breaks on equal distance go to the smaller id, everywhere, so
results are deterministic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    InvalidVectorError,
    UnknownIdError,
)
from .store import TieredVectorStore

EUCLIDEAN = "euclidean"
COSINE = "cosine"


def as_embedding(values, dimension: Optional[int] = None) -> np.ndarray:
    """Validate and convert to a float32 vector."""
    vec = np.ascontiguousarray(values, dtype=np.float32)
    if vec.ndim != 1:
        raise InvalidVectorError(f"expected a 1-D vector, got shape {vec.shape}")
    if dimension is not None and vec.shape[0] != dimension:
        raise DimensionMismatchError(
            f"vector has dimension {vec.shape[0]}, index expects {dimension}")
    if not np.isfinite(vec).all():
        raise InvalidVectorError("vector contains NaN or Inf")
    return vec


def distance(a, b, metric: str = COSINE) -> float:
    """Pairwise distance: L2 norm, or 1 - cosine similarity."""
    a = as_embedding(a)
    b = as_embedding(b)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if metric == EUCLIDEAN:
        return float(np.linalg.norm(a - b))
    if metric == COSINE:
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            raise InvalidVectorError("zero-norm vector under cosine metric")
        return 1.0 - float(np.dot(a, b)) / (na * nb)
    raise ValueError(f"unknown metric {metric!r}")


def distance_batch(q: np.ndarray, payloads: Sequence[np.ndarray],
                   metric: str) -> np.ndarray:
    """Distances from q to a batch of payload vectors."""
    mat = np.stack(payloads)
    if metric == EUCLIDEAN:
        diff = mat - q
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    norms = np.sqrt(np.einsum("ij,ij->i", mat, mat))
    qn = float(np.linalg.norm(q))
    if qn == 0.0 or (norms == 0.0).any():
        raise InvalidVectorError("zero-norm vector under cosine metric")
    return 1.0 - (mat @ q) / (norms * qn)


@dataclass(frozen=True)
class SearchParams:
    """k results out of an ef-sized candidate list (ef >= k >= 1)."""

    k: int
    ef: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.ef < self.k:
            raise ValueError("ef must be >= k")


@dataclass(frozen=True)
class SearchResult:
    vector_id: int
    distance: float
    text: Optional[str] = None


class HnswIndex:
    """Multi-layer navigable small world graph over tiered payloads."""

    def __init__(self, dimension: int, m: int = 16, ef_construction: int = 200,
                 metric: str = COSINE, seed: int = 0):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        if m < 2:
            raise ValueError("m must be >= 2")
        if ef_construction < 1:
            raise ValueError("ef_construction must be >= 1")
        if metric not in (EUCLIDEAN, COSINE):
            raise ValueError(f"unknown metric {metric!r}")
        self.dimension = dimension
        self.m = m
        self.m_max0 = 2 * m
        self.ef_construction = ef_construction
        self.ml = 1.0 / math.log(m)
        self.metric = metric
        self.seed = seed
        self.entry_point: Optional[int] = None
        self.max_level = 0
        # layers[level] maps id -> neighbor id list
        self.layers: List[Dict[int, List[int]]] = [{}]
        self.node_level: Dict[int, int] = {}
        self._rng = np.random.default_rng(seed)

    # -- level assignment --------------------------------------------------

    def assign_level(self, u: Optional[float] = None) -> int:
        """Geometric level draw: floor(-ln(u) * mL)."""
        if u is None:
            u = float(self._rng.random())
        u = max(u, np.finfo(np.float64).tiny)
        return int(math.floor(-math.log(u) * self.ml))

    # -- introspection -----------------------------------------------------

    def __len__(self) -> int:
        return len(self.node_level)

    def __contains__(self, vector_id: int) -> bool:
        return vector_id in self.node_level

    def neighbors(self, vector_id: int, level: int) -> List[int]:
        return self.layers[level][vector_id]

    def max_degree(self, level: int) -> int:
        return self.m_max0 if level == 0 else self.m

    # -- construction ------------------------------------------------------

    def insert(self, vector_id: int, vec, store: TieredVectorStore,
               level: Optional[int] = None) -> None:
        """Link a new node at levels 0..level, write-through its payload."""
        vector_id = int(vector_id)
        if vector_id in self.node_level:
            raise DuplicateIdError(f"id {vector_id} already present")
        vec = as_embedding(vec, self.dimension)
        if level is None:
            level = self.assign_level()
        store.put(vector_id, vec)

        if self.entry_point is None:
            self.node_level[vector_id] = level
            while len(self.layers) <= level:
                self.layers.append({})
            for lc in range(level + 1):
                self.layers[lc][vector_id] = []
            self.entry_point = vector_id
            self.max_level = level
            return

        ep = [self.entry_point]
        # Greedy descent through layers above the new node's level.
        for lc in range(self.max_level, level, -1):
            found = self.search_layer_baseline(vec, ep, 1, lc, store)
            ep = [found[0][0]]

        self.node_level[vector_id] = level
        while len(self.layers) <= level:
            self.layers.append({})

        for lc in range(min(level, self.max_level), -1, -1):
            found = self.search_layer_baseline(vec, ep, self.ef_construction,
                                               lc, store)
            chosen = [vid for vid, _ in found[: self.m]]
            self.layers[lc][vector_id] = list(chosen)
            max_deg = self.max_degree(lc)
            for nb in chosen:
                links = self.layers[lc][nb]
                links.append(vector_id)
                if len(links) > max_deg:
                    self._trim_neighbors(nb, lc, max_deg, store)
            ep = [vid for vid, _ in found]

        for lc in range(self.max_level + 1, level + 1):
            self.layers[lc][vector_id] = []
        if level > self.max_level:
            self.max_level = level
            self.entry_point = vector_id

    def _trim_neighbors(self, vector_id: int, level: int, max_deg: int,
                        store: TieredVectorStore) -> None:
        """Keep the nearest max_deg links of an over-full neighbor list."""
        links = self.layers[level][vector_id]
        payloads = store.get_batch(links + [vector_id])
        base = payloads[vector_id]
        dists = distance_batch(base, [payloads[n] for n in links], self.metric)
        order = sorted(range(len(links)), key=lambda i: (dists[i], links[i]))
        self.layers[level][vector_id] = [links[i] for i in order[:max_deg]]

    # -- query -------------------------------------------------------------

    def search_layer_baseline(
        self, q, ep: Iterable[int], ef: int, lc: int,
        store: TieredVectorStore,
        fetch: Optional[Callable[[List[int]], Dict[int, np.ndarray]]] = None,
    ) -> List[Tuple[int, float]]:
        """Canonical greedy layer search; every payload fetched on demand.

        Returns up to ef (id, distance) pairs, nearest first. ``fetch``
        overrides how payloads are obtained (policy drivers use this);
        the default is one batched store lookup per candidate expansion.
        """
        q = as_embedding(q, self.dimension)
        if fetch is None:
            fetch = store.get_batch
        adjacency = self.layers[lc]
        ep = sorted(set(int(e) for e in ep))
        for e in ep:
            if e not in adjacency:
                raise UnknownIdError(f"id {e} does not exist at level {lc}")

        payloads = fetch(ep)
        dists = distance_batch(q, [payloads[e] for e in ep], self.metric)
        visited = set(ep)
        candidates: List[Tuple[float, int]] = []  # min-heap
        results: List[Tuple[float, int]] = []  # max-heap via negation
        for e, d in zip(ep, dists):
            d = float(d)
            heapq.heappush(candidates, (d, e))
            heapq.heappush(results, (-d, -e))
        while len(results) > ef:
            heapq.heappop(results)

        while candidates:
            c_dist, c = heapq.heappop(candidates)
            furthest = -results[0][0]
            if c_dist > furthest and len(results) >= ef:
                break
            fresh = [e for e in adjacency[c] if e not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            payloads = fetch(fresh)
            dists = distance_batch(q, [payloads[e] for e in fresh], self.metric)
            for e, d in zip(fresh, dists):
                d = float(d)
                furthest = -results[0][0]
                if len(results) < ef or d < furthest:
                    heapq.heappush(candidates, (d, e))
                    heapq.heappush(results, (-d, -e))
                    if len(results) > ef:
                        heapq.heappop(results)
        out = [(-e, -d) for d, e in results]
        out.sort(key=lambda t: (t[1], t[0]))
        return [(e, d) for e, d in out]

    def search(self, q, params: SearchParams, store: TieredVectorStore,
               fetch: Optional[Callable] = None) -> List[SearchResult]:
        """Greedy descent with ef=1, then an ef-wide layer-0 search."""
        if self.entry_point is None:
            return []
        q = as_embedding(q, self.dimension)
        ep = [self.entry_point]
        for lc in range(self.max_level, 0, -1):
            found = self.search_layer_baseline(q, ep, 1, lc, store, fetch=fetch)
            ep = [found[0][0]]
        found = self.search_layer_baseline(q, ep, params.ef, 0, store, fetch=fetch)
        return [SearchResult(vid, d) for vid, d in found[: params.k]]
