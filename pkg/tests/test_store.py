"""Three-tier store: residency, eviction, cost model, rendezvous."""

import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tieredann import (
    BatchSignal,
    DiskBackend,
    FetchRecorder,
    MissingPayloadError,
    SimulatedBackend,
    StorageError,
    TieredVectorStore,
    UndefinedRateError,
)
from tieredann.store import BoundedCache, LruPolicy


def vec(x, dim=4):
    return np.full(dim, float(x), dtype=np.float32)


def make_store(t1, t2, n=0):
    backend = SimulatedBackend(t_tx_ms=10.0, t_item_ms=0.01)
    for i in range(n):
        backend.put(i, vec(i))
    return TieredVectorStore(backend, t1, t2), backend


# -- residency and tier traversal -------------------------------------------


def test_put_is_write_through_and_warms_tier1():
    store, backend = make_store(4, 4)
    store.put(1, vec(1))
    assert backend.contains(1)
    assert 1 in store.tier1
    assert 1 not in store.tier2


def test_cache_hit_costs_no_transaction():
    store, _ = make_store(4, 4)
    store.put(1, vec(1))
    out = store.get_batch([1])
    assert np.array_equal(out[1], vec(1))
    assert store.stats.n_db == 0
    assert store.stats.hits_t1 == 1


def test_one_call_spanning_all_three_tiers():
    store, _ = make_store(1, 1, n=3)
    store.get_batch([0])          # 0 -> tier 1
    store.get_batch([1])          # 1 -> tier 1, 0 evicted to tier 2
    assert 1 in store.tier1 and 0 in store.tier2 and not store.is_resident(2)
    store.reset_stats()
    out = store.get_batch([1, 0, 2])
    assert set(out) == {0, 1, 2}
    assert store.stats.hits_t1 == 1
    assert store.stats.hits_t2 == 1
    assert store.stats.n_db == 1
    assert store.stats.items_fetched == 1


def test_tier2_hit_promotes_back_to_tier1():
    store, _ = make_store(1, 2, n=2)
    store.get_batch([0])
    store.get_batch([1])  # 0 falls to tier 2
    assert 0 in store.tier2
    store.get_batch([0])  # promotion
    assert 0 in store.tier1
    assert 0 not in store.tier2


def test_exclusive_residency_invariant_under_churn():
    store, _ = make_store(3, 3, n=20)
    rng = np.random.default_rng(0)
    for _ in range(200):
        ids = rng.integers(0, 20, size=rng.integers(1, 5)).tolist()
        store.get_batch(sorted(set(ids)))
        overlap = set(store.tier1.data) & set(store.tier2.data)
        assert not overlap
        assert len(store.tier1) <= store.tier1.capacity
        assert len(store.tier2) <= store.tier2.capacity


def test_missing_id_raises_before_any_fetch():
    store, _ = make_store(4, 4, n=2)
    with pytest.raises(MissingPayloadError):
        store.get_batch([0, 99])
    assert store.stats.n_db == 0  # nothing charged for the failed call


# -- FIFO / eviction cascade -------------------------------------------------


def test_fifo_evicts_insertion_order_not_recency():
    store, _ = make_store(2, 4)
    store.put(1, vec(1))
    store.put(2, vec(2))
    store.get_batch([1])  # a hit must not refresh FIFO position
    store.put(3, vec(3))
    assert 1 in store.tier2  # first inserted, evicted despite recent hit
    assert 2 in store.tier1 and 3 in store.tier1


def test_tier1_eviction_cascades_into_tier2_fifo():
    store, _ = make_store(1, 2)
    for i in (1, 2, 3, 4):
        store.put(i, vec(i))
    assert 4 in store.tier1
    assert set(store.tier2.data) == {2, 3}  # 1 aged out of tier 2 first


def test_zero_capacity_tier2_drops_evictions_silently():
    store, backend = make_store(1, 0)
    store.put(1, vec(1))
    store.put(2, vec(2))
    assert not store.is_resident(1)
    assert backend.contains(1)  # still recoverable from tier 3
    out = store.get_batch([1])
    assert np.array_equal(out[1], vec(1))


def test_lru_policy_refreshes_on_hit():
    cache = BoundedCache(2, LruPolicy())
    cache.put(1, vec(1))
    cache.put(2, vec(2))
    cache.get(1)
    cache.put(3, vec(3))
    assert 1 in cache and 2 not in cache


# -- affine cost model -------------------------------------------------------


def test_batched_fetch_charges_one_transaction():
    store, backend = make_store(200, 0, n=100)
    store.get_batch(list(range(100)))
    assert store.stats.n_db == 1
    assert store.stats.items_fetched == 100
    assert store.stats.t_db_total_ms == pytest.approx(10.0 + 100 * 0.01)
    assert backend.clock.now_ms == pytest.approx(11.0)


def test_item_by_item_fetch_pays_per_transaction_overhead():
    store, backend = make_store(0, 0, n=100)  # capacity 0: every get misses
    for i in range(100):
        store.get_batch([i])
    assert store.stats.n_db == 100
    assert backend.clock.now_ms == pytest.approx(100 * 10.01)


def test_simulated_clock_only_advances_on_transactions():
    store, backend = make_store(4, 0, n=1)
    store.get_batch([0])
    t = backend.clock.now_ms
    store.get_batch([0])  # hit
    assert backend.clock.now_ms == t


# -- rendezvous contract -----------------------------------------------------


class SlowBackend:
    """Completes requests on a worker thread after a real delay."""

    def __init__(self, data, delay_s=0.02, fail=False):
        self._data = data
        self.delay_s = delay_s
        self.fail = fail

    def contains(self, vector_id):
        return vector_id in self._data

    def submit(self, ids, signal):
        def work():
            import time
            time.sleep(self.delay_s)
            if self.fail:
                signal.fail("injected backend failure")
            else:
                signal.complete({i: self._data[i] for i in ids}, cost_ms=1.0)
        threading.Thread(target=work, daemon=True).start()


def test_await_blocks_without_busy_waiting():
    backend = SlowBackend({1: vec(1), 2: vec(2)})
    store = TieredVectorStore(backend, 4, 0)
    out = store.get_batch([1, 2])
    assert set(out) == {1, 2}


def test_poll_count_is_bounded_not_a_spin_loop():
    backend = SlowBackend({1: vec(1)}, delay_s=0.05)
    store = TieredVectorStore(backend, 4, 0)
    signal = store.request_batch([1])
    store.await_completion(signal)
    assert signal.poll_count <= 3


def test_payloads_visible_at_completion_observation():
    backend = SlowBackend({i: vec(i) for i in range(8)})
    store = TieredVectorStore(backend, 8, 0)
    signal = store.request_batch([3, 5])
    payloads = store.await_completion(signal)
    assert np.array_equal(payloads[3], vec(3))
    assert np.array_equal(payloads[5], vec(5))


def test_backend_error_surfaces_as_storage_error():
    backend = SlowBackend({1: vec(1)}, fail=True)
    store = TieredVectorStore(backend, 4, 0)
    with pytest.raises(StorageError, match="injected"):
        store.get_batch([1])


def test_signal_cannot_complete_twice():
    signal = BatchSignal()
    signal.complete({}, cost_ms=0.0)
    with pytest.raises(StorageError):
        signal.complete({}, cost_ms=0.0)
    with pytest.raises(StorageError):
        signal.fail("late")


def test_fast_path_completion_before_first_check():
    store, _ = make_store(4, 0, n=1)
    signal = store.request_batch([0])  # simulated backend completes inline
    assert store.await_completion(signal) is not None
    assert signal.poll_count <= 2


# -- redundancy accounting ---------------------------------------------------


def test_fixed_prefetch_redundancy_formula():
    store, _ = make_store(64, 0, n=50)
    store.get_batch(list(range(10)))       # one tx, 10 items
    store.get_batch(list(range(10)))       # 10 hits
    store.get_batch(list(range(10, 20)))   # second tx
    store.get_batch(list(range(10, 20)))   # 10 more hits
    # 2 transactions at a nominal prefetch width of 20: 20 useful of 40
    assert store.redundancy_rate(prefetch_size=20) == pytest.approx(0.5)


def test_lazy_redundancy_zero_when_everything_evaluated():
    store, _ = make_store(64, 0, n=10)
    store.get_batch(list(range(10)))
    store.note_evaluated(range(10))
    assert store.redundancy_rate() == pytest.approx(0.0)


def test_lazy_redundancy_counts_unevaluated_payloads():
    store, _ = make_store(64, 0, n=10)
    store.get_batch(list(range(10)))
    store.note_evaluated(range(4))
    assert store.redundancy_rate() == pytest.approx(0.6)


def test_note_evaluated_is_idempotent_per_fetch():
    store, _ = make_store(64, 0, n=4)
    store.get_batch([0, 1])
    store.note_evaluated([0, 0, 1])
    store.note_evaluated([0])
    assert store.stats.evaluated_fetched == 2


def test_redundancy_undefined_without_transactions():
    store, _ = make_store(4, 0)
    with pytest.raises(UndefinedRateError):
        store.redundancy_rate()


def test_recorder_tracks_transactions_and_waste():
    store, _ = make_store(64, 0, n=10)
    store.recorder = rec = FetchRecorder()
    store.get_batch([0, 1, 2])
    store.get_batch([5, 6])
    store.note_evaluated([0, 1, 5])
    assert rec.transactions == [[0, 1, 2], [5, 6]]
    assert rec.unused_fetched == {2, 6}


# -- budget control ----------------------------------------------------------


def test_set_budget_splits_between_tiers():
    store, _ = make_store(1, 1)
    store.set_budget(10, split_ratio=0.3)
    assert store.tier1.capacity == 3
    assert store.tier2.capacity == 7
    assert store.total_budget == 10


def test_set_budget_keeps_at_least_one_tier1_slot():
    store, _ = make_store(1, 1)
    store.set_budget(1, split_ratio=0.1)
    assert store.tier1.capacity == 1
    assert store.tier2.capacity == 0


def test_shrinking_budget_spills_then_drops():
    store, _ = make_store(8, 8, n=8)
    store.get_batch(list(range(8)))
    store.set_budget(4, split_ratio=0.5)
    assert len(store.tier1) <= 2 and len(store.tier2) <= 2
    # everything is still reachable through tier 3
    assert set(store.get_batch(list(range(8)))) == set(range(8))


# -- shadow-map equivalence property -----------------------------------------


@settings(max_examples=60, deadline=None)
@given(
    caps=st.tuples(st.integers(0, 4), st.integers(0, 4)),
    ops=st.lists(st.lists(st.integers(0, 11), min_size=1, max_size=5),
                 min_size=1, max_size=25),
)
def test_store_reads_match_plain_dict(caps, ops):
    """Whatever the cache shape, reads must equal a plain id->payload map."""
    store, _ = make_store(caps[0], caps[1], n=12)
    shadow = {i: vec(i) for i in range(12)}
    for batch in ops:
        out = store.get_batch(batch)
        assert set(out) == set(batch)
        for i in batch:
            assert np.array_equal(out[i], shadow[i])
        assert not (set(store.tier1.data) & set(store.tier2.data))


def test_disk_backend_round_trip(tmp_path):
    path = tmp_path / "payloads.bin"
    backend = DiskBackend(path, 4, create=True)
    for i in range(6):
        backend.put(i, vec(i))
    backend.close()

    reopened = DiskBackend(path, 4)
    store = TieredVectorStore(reopened, 8, 0)
    out = store.get_batch([0, 3, 5])
    for i in (0, 3, 5):
        assert np.array_equal(out[i], vec(i))
    assert len(reopened) == 6
    reopened.close()


def test_disk_backend_overwrite_updates_in_place(tmp_path):
    path = tmp_path / "payloads.bin"
    backend = DiskBackend(path, 2, create=True)
    backend.put(1, np.array([1.0, 1.0], dtype=np.float32))
    backend.put(1, np.array([9.0, 9.0], dtype=np.float32))
    backend.close()
    reopened = DiskBackend(path, 2)
    assert len(reopened) == 1
    store = TieredVectorStore(reopened, 2, 0)
    assert np.array_equal(store.get_batch([1])[1],
                          np.array([9.0, 9.0], dtype=np.float32))
    reopened.close()
