"""Heuristic minimum-memory search for the cache budget.

Models the transaction count per query as a function of the item budget:
a linear bound for random fetching, an inverse-proportional bound for
optimal fetching. The optimizer treats the live query pipeline as a black
box, probing decreasing budgets along the secant through the observed
point and the anchor (1 item, full query-path length) until the measured
transaction count crosses a latency-derived threshold. A rollback rule
walks the budget history backwards if live traffic later regresses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

__all__ = [
    "OptimizerParams", "QueryTestReport", "OptimizerProbe", "OptimizerState",
    "OptimizerResult", "predict_ndb_random", "predict_ndb_optimal",
    "get_theta", "optimize_memory_size", "check_rollback",
]


def predict_ndb_random(n_mem: int, n_items: int, q_len: int) -> float:
    """Expected transactions per query under random fetching.

    Linear in the item budget: ``((1 - q_len)/(N - 1)) * n_mem +
    (N * q_len - 1)/(N - 1)``, collapsing to 1 once the budget covers the
    dataset and to q_len at a single-item budget.
    """
    if n_items < 2:
        raise ValueError("dataset size must be >= 2")
    if q_len < 1:
        raise ValueError("query path length must be >= 1")
    if n_mem >= n_items:
        return 1.0
    return ((1 - q_len) / (n_items - 1)) * n_mem + (n_items * q_len - 1) / (n_items - 1)


def predict_ndb_optimal(n_mem: int, q_len: int) -> int:
    """Transactions per query under oracle prefetching: ceil(q_len / n_mem)."""
    if n_mem < 1:
        raise ValueError("memory budget must be >= 1")
    if q_len < 1:
        raise ValueError("query path length must be >= 1")
    if n_mem >= q_len:
        return 1
    return math.ceil(q_len / n_mem)


def get_theta(p: float, t_theta_ms: float, t_query_ms: float,
              t_db_ms: float) -> float:
    """Transaction-count threshold from the latency budget.

    ``max(p * T_query / t_db, T_theta / t_db)``: keep external-access time
    below a share p of total query time, or below an absolute budget.
    """
    if t_db_ms <= 0:
        raise ValueError("t_db must be > 0; measure at least one transaction")
    return max(p * t_query_ms / t_db_ms, t_theta_ms / t_db_ms)


@dataclass(frozen=True)
class OptimizerParams:
    p: float                 # external-access share of query time, in (0, 1]
    t_theta_ms: float        # absolute external-access time budget
    c_0: int                 # starting budget, items
    max_probes: int = 10     # probe budget; each probe runs the test workload

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError("p must be in (0, 1]")
        if self.t_theta_ms < 0:
            raise ValueError("T_theta must be >= 0")
        if self.c_0 < 1:
            raise ValueError("C_0 must be >= 1")
        if self.max_probes < 1:
            raise ValueError("max_probes must be >= 1")


@dataclass(frozen=True)
class QueryTestReport:
    """Mean metrics of one probe workload at the applied budget."""

    n_db: float       # mean transactions per query
    n_q: float        # mean visited count per query
    t_query_ms: float  # mean total query time
    t_db_ms: float    # mean time per transaction

    def __post_init__(self):
        if min(self.n_db, self.n_q, self.t_query_ms, self.t_db_ms) < 0:
            raise ValueError("report metrics must be >= 0")


@dataclass(frozen=True)
class OptimizerProbe:
    budget: int
    theta: float
    n_db: float
    n_q: float
    t_query_ms: float
    accepted: bool


@dataclass
class OptimizerState:
    """Accepted (budget, theta) steps; supports walking back on regression."""

    history: List[tuple] = field(default_factory=list)  # (C_i, theta_i)
    current: int = 0  # index of the active history entry

    @property
    def current_budget(self) -> Optional[int]:
        return self.history[self.current][0] if self.history else None


@dataclass
class OptimizerResult:
    c_best: int
    c_0: int
    state: OptimizerState
    probes: List[OptimizerProbe]

    @property
    def items_saved(self) -> int:
        return self.c_0 - self.c_best

    @property
    def percent_saved(self) -> float:
        return 100.0 * self.items_saved / self.c_0


def optimize_memory_size(
    params: OptimizerParams,
    query_test: Callable[[], QueryTestReport],
    apply_budget: Callable[[int], None],
) -> OptimizerResult:
    """Shrink the cache budget until transactions cross the threshold.

    Each iteration probes the current budget, recomputes theta from the
    probe's own timings, and steps to where the line through the observed
    point and the anchor (1, n_q) crosses theta. Stops on threshold
    violation (keeping the previous best), on a sub-item step, or when the
    probe budget runs out. The best budget is re-applied before returning,
    and also if a probe raises.
    """
    state = OptimizerState()
    probes: List[OptimizerProbe] = []
    c_best = params.c_0
    c_test = params.c_0
    try:
        while 0 < c_test <= params.c_0 and len(probes) < params.max_probes:
            apply_budget(c_test)
            report = query_test()
            theta = get_theta(params.p, params.t_theta_ms,
                              report.t_query_ms, report.t_db_ms)
            accepted = report.n_db <= theta
            probes.append(OptimizerProbe(c_test, theta, report.n_db,
                                         report.n_q, report.t_query_ms, accepted))
            if not accepted:
                break
            c_best = c_test
            state.history.append((c_test, theta))
            if c_test <= 1:
                break
            k = (report.n_q - report.n_db) / (1 - c_test)
            if k == 0:
                break
            c_next = math.ceil((theta - report.n_q) / k + 1)
            if c_test - c_next < 1:
                break  # minimum-step guard
            c_test = c_next
    finally:
        apply_budget(c_best)
    state.current = len(state.history) - 1 if state.history else 0
    return OptimizerResult(c_best, params.c_0, state, probes)


def check_rollback(state: OptimizerState, live: QueryTestReport,
                   apply_budget: Callable[[int], None]) -> Optional[int]:
    """Step the budget back one history entry if live traffic regressed.

    Returns the newly applied budget, or None if no rollback fired.
    Repeated regressions walk the history in reverse, stopping at the
    first entry (the starting budget).
    """
    if not state.history:
        return None
    _, theta = state.history[state.current]
    if live.n_db <= theta or state.current == 0:
        return None
    state.current -= 1
    budget = state.history[state.current][0]
    apply_budget(budget)
    return budget
