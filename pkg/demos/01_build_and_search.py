"""Build a small index and run a few queries.

Vector payloads live in a tiered store (two bounded caches over a
batch-transactional backend); the graph topology stays in memory.
"""

import numpy as np

from tieredann import HnswIndex, SearchParams, SimulatedBackend, TieredVectorStore

rng = np.random.default_rng(0)
data = rng.standard_normal((1000, 32)).astype(np.float32)

backend = SimulatedBackend(t_tx_ms=10.0, t_item_ms=0.01)
store = TieredVectorStore(backend, tier1_capacity=1000, tier2_capacity=0)

index = HnswIndex(dimension=32, m=16, ef_construction=64, metric="cosine")
for i, vec in enumerate(data):
    index.insert(i, vec, store)

print(f"indexed {len(index)} vectors, {index.max_level + 1} graph levels")

params = SearchParams(k=5, ef=64)
query = data[123] + 0.1 * rng.standard_normal(32).astype(np.float32)
for r in index.search(query, params, store):
    print(f"  id={r.vector_id:4d}  distance={r.distance:.4f}")

# An exact payload is its own nearest neighbor.
top = index.search(data[123], params, store)[0]
print(f"self-query returns id {top.vector_id} at distance {top.distance:.2e}")
