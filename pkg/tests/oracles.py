"""Independent oracles used to freeze expected values.

Everything here is deliberately implemented without touching the package's
search/store code paths: scalar loops, exhaustive scans, and direct
stochastic simulation of the fetching processes.
"""

from __future__ import annotations

import math

import numpy as np


def naive_distance(a, b, metric: str) -> float:
    """Scalar-loop distance, no vectorization."""
    if metric == "euclidean":
        acc = 0.0
        for x, y in zip(a, b):
            acc += (float(x) - float(y)) ** 2
        return math.sqrt(acc)
    dot = na = nb = 0.0
    for x, y in zip(a, b):
        x, y = float(x), float(y)
        dot += x * y
        na += x * x
        nb += y * y
    return 1.0 - dot / math.sqrt(na * nb)


def brute_force_knn(data: np.ndarray, q: np.ndarray, k: int,
                    metric: str) -> list:
    """Exhaustive exact top-k; ties broken by smaller row index."""
    dists = []
    if metric == "euclidean":
        diff = data.astype(np.float64) - q.astype(np.float64)
        d = np.sqrt((diff * diff).sum(axis=1))
    else:
        qd = q.astype(np.float64)
        dd = data.astype(np.float64)
        d = 1.0 - (dd @ qd) / (np.linalg.norm(dd, axis=1) * np.linalg.norm(qd))
    order = sorted(range(len(d)), key=lambda i: (d[i], i))[:k]
    return order


def brute_force_topk_matrix(data: np.ndarray, queries: np.ndarray,
                            k: int, metric: str) -> np.ndarray:
    """Exact top-k ids for a batch of queries, shape (n_queries, k)."""
    if metric == "euclidean":
        d2 = ((queries[:, None, :] - data[None, :, :]) ** 2).sum(-1)
        dist = d2
    else:
        qn = np.linalg.norm(queries, axis=1, keepdims=True)
        dn = np.linalg.norm(data, axis=1, keepdims=True).T
        dist = 1.0 - (queries @ data.T) / (qn * dn)
    part = np.argpartition(dist, k, axis=1)[:, : 2 * k]
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for i in range(queries.shape[0]):
        cand = part[i]
        cand = cand[np.lexsort((cand, dist[i, cand]))]
        out[i] = cand[:k]
    return out


def simulate_random_fetch(n_items: int, q_len: int, n_mem: int, trials: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Direct simulation of the random-fetching cache process.

    A query touches q_len distinct items. On each miss, one external
    access loads the missed item plus (n_mem - 1) uniformly random other
    items, replacing the memory contents. Returns per-trial access counts.
    """
    counts = np.empty(trials, dtype=np.int64)
    mem = np.zeros(n_items, dtype=bool)
    for t in range(trials):
        path = rng.choice(n_items, size=q_len, replace=False)
        mem[:] = False
        n_db = 0
        for d in path:
            if not mem[d]:
                n_db += 1
                mem[:] = False
                if n_mem > 1:
                    others = rng.choice(n_items - 1, size=min(n_mem, n_items) - 1,
                                        replace=False)
                    others = others + (others >= d)
                    mem[others] = True
                mem[d] = True
        counts[t] = n_db
    return counts


def replay_optimal_prefetch(path: np.ndarray, n_mem: int) -> int:
    """Oracle prefetcher replay: each access loads the next n_mem path items."""
    resident = set()
    accesses = 0
    for i, item in enumerate(path):
        if item not in resident:
            accesses += 1
            resident = set(path[i: i + n_mem])
    return accesses
