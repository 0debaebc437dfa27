"""Find the smallest cache budget that keeps query latency in budget.

The optimizer probes decreasing budgets along a secant through the
observed (budget, transactions) point, stopping when transactions would
cross a latency-derived threshold. A rollback rule walks the accepted
budget history backwards if live traffic later regresses.
"""

from tieredann import QueryTestReport, SimulatedBackend, TieredVectorStore, check_rollback
from tieredann.bench import build_index, make_dataset, make_queries, run_optimize

data = make_dataset(2000, 32, seed=4)
store = TieredVectorStore(SimulatedBackend(), 2 ** 62, 0)
index = build_index(data, store, m=16, ef_construction=64)
probe_queries = make_queries(data, 16, seed=5)

store.set_budget(len(index))
result = run_optimize(index, store, probe_queries, p=0.8, t_theta_ms=100.0)

print(f"{'budget':>7} {'n_db':>7} {'theta':>7}  accepted")
for probe in result.probes:
    print(f"{probe.budget:7d} {probe.n_db:7.2f} {probe.theta:7.2f}  "
          f"{probe.accepted}")
print(f"kept {result.c_best} of {result.c_0} items "
      f"({result.percent_saved:.1f}% saved)")

# Simulate a workload shift: transactions jump past the threshold, so the
# budget steps back one history entry at a time.
state = result.state
theta = state.history[state.current][1]
shifted = QueryTestReport(n_db=2 * theta, n_q=500.0, t_query_ms=20.0,
                          t_db_ms=10.0)
rolled = check_rollback(state, shifted, store.set_budget)
print(f"after regression, budget rolled back to {rolled}")
