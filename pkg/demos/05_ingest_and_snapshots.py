"""Stream a JSONL corpus into an index and persist it.

Records carry a text and an embedding; texts are stored separately and
only read back for final results. The snapshot holds the graph topology
with per-block checksums, and payloads live in a key-value file.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from tieredann import (
    HnswIndex,
    SearchParams,
    SimulatedBackend,
    TextStore,
    TieredVectorStore,
    ingest_stream,
    load_index,
    save_index,
    search_lazy,
)

rng = np.random.default_rng(6)
lines = [
    json.dumps({"text": f"passage number {i}",
                "embedding": rng.standard_normal(16).round(4).tolist()})
    for i in range(500)
]

index = HnswIndex(16, m=8, ef_construction=32, metric="cosine")
store = TieredVectorStore(SimulatedBackend(), 2 ** 62, 0)
texts = TextStore()
count = ingest_stream(lines, index, store, texts, chunk_size=100)
print(f"ingested {count} records in chunks of 100")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "index.tidx"
    save_index(index, path, vector_ref="payloads.bin")
    loaded, vector_ref = load_index(path)
    print(f"snapshot: {path.stat().st_size} bytes, payload ref {vector_ref!r}")

    params = SearchParams(k=3, ef=32)
    q = rng.standard_normal(16).astype(np.float32)
    assert loaded.search(q, params, store) == index.search(q, params, store)
    print("loaded index returns identical results")

results, stats = search_lazy(index, q, SearchParams(k=3, ef=32), store,
                             text_store=texts)
for r in results:
    print(f"  id={r.vector_id:3d}  d={r.distance:.4f}  {r.text!r}")
print(f"text lookups: {texts.lookups} (only the final k results)")
