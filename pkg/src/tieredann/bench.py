"""Benchmark harness: datasets, fetch policies, sweeps, optimizer runs.

Latency on the simulated backend is split into a deterministic component
(virtual-clock storage time) and wall-clock compute; reports keep them
separate so sweep CSVs are byte-reproducible across machines.
"""

from __future__ import annotations

import json
import math
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .hnsw import HnswIndex, SearchParams, SearchResult
from .ingest import TextStore, ingest_stream, load_index, save_index
from .lazy import QueryStats, search_lazy
from .optimizer import (
    OptimizerParams,
    OptimizerResult,
    QueryTestReport,
    optimize_memory_size,
)
from .store import (
    _KV_HEADER,
    DiskBackend,
    SimulatedBackend,
    TieredVectorStore,
)

POLICIES = ("lazy", "on-demand-item", "fixed-prefetch")


def make_dataset(n: int, dimension: int, seed: int = 0) -> np.ndarray:
    """Synthetic Gaussian corpus, float32, shape (n, dimension)."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, dimension)).astype(np.float32)


def make_queries(data: np.ndarray, n_queries: int, seed: int = 1,
                 mode: str = "perturb", noise: float = 0.25) -> np.ndarray:
    """Query vectors: perturbed corpus rows, or pure Gaussian draws."""
    rng = np.random.default_rng(seed)
    d = data.shape[1]
    if mode == "gaussian":
        return rng.standard_normal((n_queries, d)).astype(np.float32)
    if mode != "perturb":
        raise ValueError(f"unknown query mode {mode!r}")
    base = rng.integers(0, data.shape[0], size=n_queries)
    out = data[base] + noise * rng.standard_normal((n_queries, d)).astype(np.float32)
    return out.astype(np.float32)


def brute_force_topk(data: np.ndarray, ids: Sequence[int], q: np.ndarray,
                     k: int, metric: str) -> List[Tuple[int, float]]:
    """Exhaustive exact top-k over the full payload matrix."""
    if metric == "euclidean":
        d = np.linalg.norm(data - q, axis=1)
    else:
        norms = np.linalg.norm(data, axis=1) * np.linalg.norm(q)
        d = 1.0 - (data @ q) / norms
    ids = np.asarray(ids)
    order = np.lexsort((ids, d))[:k]
    return [(int(ids[i]), float(d[i])) for i in order]


def build_index(data: np.ndarray, store: TieredVectorStore, m: int = 16,
                ef_construction: int = 100, metric: str = "cosine",
                seed: int = 0) -> HnswIndex:
    index = HnswIndex(data.shape[1], m=m, ef_construction=ef_construction,
                      metric=metric, seed=seed)
    for i, vec in enumerate(data):
        index.insert(i, vec, store)
    return index


# -- fetch policies ----------------------------------------------------------


def make_fetch(index: HnswIndex, store: TieredVectorStore, policy: str,
               prefetch_size: int = 64) -> Optional[Callable]:
    """Payload-fetch driver for the comparison policies.

    ``on-demand-item`` issues one transaction per missing item.
    ``fixed-prefetch`` pads every miss batch with graph neighbors up to a
    fixed prefetch size, approximating a heuristic prefetcher. ``lazy``
    returns None (handled by the lazy search path).
    """
    if policy == "lazy":
        return None
    if policy == "on-demand-item":
        def fetch(ids):
            out = {}
            resident = [i for i in ids if store.is_resident(i)]
            if resident:
                out.update(store.get_batch(resident))
            for vector_id in ids:
                if vector_id not in out:
                    out.update(store.get_batch([vector_id]))
            return out
        return fetch
    if policy == "fixed-prefetch":
        layer0 = index.layers[0]

        def fetch(ids):
            out = {}
            resident = [i for i in ids if store.is_resident(i)]
            if resident:
                out.update(store.get_batch(resident))
            misses = [i for i in ids if i not in out]
            if misses:
                pool = list(misses)
                seen = set(pool)
                for vector_id in misses:
                    if len(pool) >= prefetch_size:
                        break
                    for nb in layer0.get(vector_id, ()):
                        if len(pool) >= prefetch_size:
                            break
                        if nb not in seen and not store.is_resident(nb):
                            pool.append(nb)
                            seen.add(nb)
                fetched = store.get_batch(pool)
                out.update({i: fetched[i] for i in misses})
            return out
        return fetch
    raise ValueError(f"unknown policy {policy!r}")


def run_query(index: HnswIndex, q: np.ndarray, params: SearchParams,
              store: TieredVectorStore, policy: str = "lazy",
              prefetch_size: int = 64,
              text_store: Optional[TextStore] = None,
              ) -> Tuple[List[SearchResult], QueryStats]:
    """One query under the given policy, with per-query stats."""
    if policy == "lazy":
        return search_lazy(index, q, params, store, text_store=text_store)
    fetch = make_fetch(index, store, policy, prefetch_size)
    stats = QueryStats()
    requested = [0]

    def counting_fetch(ids):
        requested[0] += len(ids)
        out = fetch(ids)
        store.note_evaluated(ids)  # every requested payload gets evaluated
        return out

    before = store.stats.snapshot()
    t0 = time.perf_counter()
    results = index.search(q, params, store, fetch=counting_fetch)
    wall_ms = (time.perf_counter() - t0) * 1e3
    after = store.stats.snapshot()
    stats.n_q = requested[0]
    stats.n_db = after[0] - before[0]
    stats.items_fetched = after[1] - before[1]
    stats.storage_ms = after[4] - before[4]
    stats.compute_ms = wall_ms
    if text_store is not None:
        results = [SearchResult(r.vector_id, r.distance,
                                text_store.get_text(r.vector_id))
                   for r in results]
    return results, stats


# -- sweep -------------------------------------------------------------------


@dataclass
class SweepConfig:
    ratios: Sequence[float] = (0.2, 0.5, 0.9, 0.96, 1.0)
    queries: int = 100
    ef: int = 64
    k: int = 10
    policy: str = "lazy"
    prefetch_size: int = 64
    split_ratio: float = 0.5
    seed: int = 1
    query_mode: str = "perturb"
    cold: bool = False  # clear caches before every query
    warmup: int = 1     # unmeasured queries run after each budget change

    def __post_init__(self):
        for r in self.ratios:
            if not 0 < r <= 1:
                raise ValueError(f"ratio {r} outside (0, 1]")
        if self.queries < 1:
            raise ValueError("queries must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class RatioRow:
    ratio: float
    budget: int
    mean_sim_ms: float
    p99_sim_ms: float
    mean_n_db: float
    mean_items_fetched: float
    mean_n_q: float
    redundancy: float
    mean_wall_ms: float
    p99_wall_ms: float
    distance_ms: float
    store_ms: float
    other_ms: float


@dataclass
class BenchReport:
    policy: str
    rows: List[RatioRow] = field(default_factory=list)

    def to_csv(self) -> str:
        """Deterministic columns only (virtual-clock latencies and counts)."""
        lines = ["ratio,budget,policy,mean_n_db,mean_items_fetched,"
                 "mean_sim_ms,p99_sim_ms,redundancy"]
        for r in self.rows:
            lines.append(
                f"{r.ratio:g},{r.budget},{self.policy},{r.mean_n_db:.6f},"
                f"{r.mean_items_fetched:.6f},{r.mean_sim_ms:.6f},"
                f"{r.p99_sim_ms:.6f},{r.redundancy:.6f}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "policy": self.policy,
            "rows": [vars(r) for r in self.rows],
        }, indent=2)


def percentile_99(values: Sequence[float]) -> float:
    """Nearest-rank 99th percentile."""
    ordered = sorted(values)
    rank = math.ceil(0.99 * len(ordered))
    return ordered[max(rank - 1, 0)]


def run_sweep(index: HnswIndex, store: TieredVectorStore,
              queries: np.ndarray, config: SweepConfig) -> BenchReport:
    """Timed queries at each memory-data ratio, one warm-up per ratio."""
    n_items = len(index)
    params = SearchParams(k=config.k, ef=config.ef)
    report = BenchReport(policy=config.policy)
    for ratio in config.ratios:
        budget = math.ceil(ratio * n_items)
        store.set_budget(budget, config.split_ratio)
        store.clear_caches()
        store.reset_stats()
        for i in range(config.warmup):
            run_query(index, queries[i % len(queries)], params, store,
                      config.policy, config.prefetch_size)
        store.reset_stats()
        per_query: List[QueryStats] = []
        for q in queries[: config.queries]:
            if config.cold:
                store.clear_caches()
            _, stats = run_query(index, q, params, store, config.policy,
                                 config.prefetch_size)
            per_query.append(stats)
        sim = [s.storage_ms for s in per_query]
        wall = [s.compute_ms for s in per_query]
        total = [s.t_query_ms for s in per_query]
        dist_ms = sum(s.distance_ms for s in per_query)
        store_ms = sum(sim)
        other_ms = sum(total) - dist_ms - store_ms
        if store.stats.n_db == 0:
            redundancy = 0.0
        elif config.policy == "fixed-prefetch":
            redundancy = store.redundancy_rate(config.prefetch_size)
        else:
            redundancy = store.redundancy_rate()
        report.rows.append(RatioRow(
            ratio=ratio,
            budget=budget,
            mean_sim_ms=float(np.mean(sim)),
            p99_sim_ms=percentile_99(sim),
            mean_n_db=float(np.mean([s.n_db for s in per_query])),
            mean_items_fetched=float(np.mean([s.items_fetched for s in per_query])),
            mean_n_q=float(np.mean([s.n_q for s in per_query])),
            redundancy=redundancy,
            mean_wall_ms=float(np.mean(wall)),
            p99_wall_ms=percentile_99(wall),
            distance_ms=dist_ms,
            store_ms=store_ms,
            other_ms=other_ms,
        ))
    return report


# -- optimizer harness -------------------------------------------------------


def make_query_test(index: HnswIndex, store: TieredVectorStore,
                    probe_queries: np.ndarray, ef: int = 64,
                    k: int = 10) -> Callable[[], QueryTestReport]:
    """Fixed probe workload run at the currently applied budget."""
    params = SearchParams(k=k, ef=ef)

    def query_test() -> QueryTestReport:
        per_query = []
        for q in probe_queries:
            _, stats = search_lazy(index, q, params, store)
            per_query.append(stats)
        n_db = float(np.mean([s.n_db for s in per_query]))
        total_tx = sum(s.n_db for s in per_query)
        total_storage = sum(s.storage_ms for s in per_query)
        if total_tx:
            t_db = total_storage / total_tx
        else:
            # No transaction observed at this budget; fall back to the
            # backend's single-item transaction estimate.
            t_db = getattr(store.backend, "estimated_tx_ms", lambda n: 1.0)(1)
        return QueryTestReport(
            n_db=n_db,
            n_q=float(np.mean([s.n_q for s in per_query])),
            t_query_ms=float(np.mean([s.t_query_ms for s in per_query])),
            t_db_ms=t_db,
        )

    return query_test


def run_optimize(index: HnswIndex, store: TieredVectorStore,
                 probe_queries: np.ndarray, p: float = 0.8,
                 t_theta_ms: float = 100.0, ef: int = 64, k: int = 10,
                 c_0: Optional[int] = None,
                 max_probes: int = 10) -> OptimizerResult:
    c_0 = c_0 if c_0 is not None else len(index)
    params = OptimizerParams(p=p, t_theta_ms=t_theta_ms, c_0=c_0,
                             max_probes=max_probes)
    query_test = make_query_test(index, store, probe_queries, ef=ef, k=k)

    def apply_budget(budget: int) -> None:
        store.set_budget(budget)

    return optimize_memory_size(params, query_test, apply_budget)


def optimizer_report_json(result: OptimizerResult) -> str:
    return json.dumps({
        "history": [
            {"budget": pr.budget, "theta": pr.theta, "n_db": pr.n_db,
             "t_query_ms": pr.t_query_ms, "accepted": pr.accepted}
            for pr in result.probes
        ],
        "c_best": result.c_best,
        "c_0": result.c_0,
        "items_saved": result.items_saved,
        "percent_saved": result.percent_saved,
    }, indent=2)


# -- payload file helpers ----------------------------------------------------


def load_payload_file(path: str | Path) -> Tuple[np.ndarray, np.ndarray]:
    """Read a tier-3 key-value file into (ids, matrix)."""
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.read(_KV_HEADER.size)
        magic, version, dim, count = _KV_HEADER.unpack(header)
        rec = np.dtype([("id", "<u8"), ("vec", "<f4", (dim,))])
        data = np.fromfile(fh, dtype=rec, count=count)
    return data["id"].astype(np.uint64), np.ascontiguousarray(data["vec"])


def simulated_store_from_payloads(ids: np.ndarray, mat: np.ndarray,
                                  tier1: int, tier2: int,
                                  t_tx_ms: float = 10.0,
                                  t_item_ms: float = 0.01,
                                  split_ratio: float = 0.5,
                                  ) -> TieredVectorStore:
    backend = SimulatedBackend(t_tx_ms=t_tx_ms, t_item_ms=t_item_ms)
    for vector_id, row in zip(ids, mat):
        backend.put(int(vector_id), row)
    return TieredVectorStore(backend, tier1, tier2, split_ratio=split_ratio)
