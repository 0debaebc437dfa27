import time
from dataclasses import dataclass

import numpy as np
import pytest

from tieredann.bench import build_index, make_dataset, make_queries
from tieredann.hnsw import HnswIndex
from tieredann.store import SimulatedBackend, TieredVectorStore

from oracles import brute_force_topk_matrix

SESSION_START = time.perf_counter()

# Per-criterion verdict lines from the acceptance module; echoed in the
# terminal summary because pytest's fd capture hides mid-test prints.
CRITERION_LINES: list = []


@dataclass
class Corpus:
    data: np.ndarray
    index: HnswIndex
    store: TieredVectorStore
    queries: np.ndarray
    exact_top10: np.ndarray  # brute-force oracle ids, shape (n_queries, 10)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def reset(self, budget=None, warm=False, split=0.5):
        """Re-point the shared store at a budget with empty caches."""
        store = self.store
        store.set_budget(budget if budget is not None else self.n, split)
        store.clear_caches()
        store.reset_stats()
        if warm:
            ids = list(range(self.n))
            for lo in range(0, self.n, 2048):
                store.get_batch(ids[lo: lo + 2048])
            store.reset_stats()
        return store


def _make_corpus(n, dim, m, ef_construction, n_queries, seed):
    data = make_dataset(n, dim, seed=seed)
    backend = SimulatedBackend(t_tx_ms=10.0, t_item_ms=0.01)
    store = TieredVectorStore(backend, 2 ** 62, 0)
    index = build_index(data, store, m=m, ef_construction=ef_construction,
                        metric="cosine", seed=seed)
    queries = make_queries(data, n_queries, seed=seed + 1)
    exact = brute_force_topk_matrix(data, queries, 10, "cosine")
    return Corpus(data, index, store, queries, exact)


@pytest.fixture(scope="session")
def desk():
    """10k x 64 Gaussian corpus with a prebuilt index (shared, read-only
    topology; tests reconfigure the store via Corpus.reset)."""
    return _make_corpus(n=10_000, dim=64, m=16, ef_construction=100,
                        n_queries=1000, seed=0)


@pytest.fixture(scope="session")
def small2k():
    """2k x 16 corpus built at ef_construction=200 for recall checks."""
    return _make_corpus(n=2000, dim=16, m=16, ef_construction=200,
                        n_queries=200, seed=11)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - SESSION_START
    if CRITERION_LINES:
        terminalreporter.write_line("acceptance criteria:")
        for line in CRITERION_LINES:
            terminalreporter.write_line(f"  {line}")
    terminalreporter.write_line(
        f"primary suite wall-clock: {elapsed:.1f}s (budget 300s)")
