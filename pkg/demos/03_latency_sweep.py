"""Sweep the memory-data ratio and watch simulated latency collapse.

The backend charges an affine cost per transaction on a virtual clock
(10 ms + 0.01 ms/item), so the numbers below are deterministic.
"""

import numpy as np

from tieredann import SimulatedBackend, TieredVectorStore
from tieredann.bench import SweepConfig, build_index, make_dataset, make_queries, run_sweep

data = make_dataset(2000, 32, seed=2)
store = TieredVectorStore(SimulatedBackend(), 2 ** 62, 0)
index = build_index(data, store, m=16, ef_construction=64)
queries = make_queries(data, 50, seed=3)

config = SweepConfig(ratios=[0.2, 0.5, 0.9, 1.0], queries=50, warmup=50)
report = run_sweep(index, store, queries, config)

print(f"{'ratio':>6} {'budget':>7} {'mean tx':>8} {'mean ms':>8} {'p99 ms':>8}")
for row in report.rows:
    print(f"{row.ratio:6.2f} {row.budget:7d} {row.mean_n_db:8.2f} "
          f"{row.mean_sim_ms:8.2f} {row.p99_sim_ms:8.2f}")

# The CSV form carries only virtual-clock columns, so it is byte-stable.
print()
print(report.to_csv())
