"""
Deterministic checkpoint-selection strategies.
The uniform baseline, the exact dynamic program over candidate steps and an
exhaustive enumeration oracle used to check optimality.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
import psutil

from distribution_core import (
    CheckpointPlan,
    FaultDistribution,
    InvariantViolation,
    SavingsReport,
    StepTable,
    savings,
    snap_to_steps,
    step_table,
)

logger = logging.getLogger(__name__)

DEFAULT_EXHAUSTIVE_BUDGET = 10_000_000
_ENUMERATION_CHUNK = 100_000


class BudgetExceededError(RuntimeError):
    """Raised when exhaustive enumeration would exceed its budget."""


class PlacementMethod(Enum):
    UNIFORM = "uniform"
    DP = "dp"
    GENETIC = "genetic"
    EXHAUSTIVE = "exhaustive"


@dataclass
class PlacementResult:
    plan: CheckpointPlan
    report: SavingsReport
    method: str
    elapsed: float
    k_requested: int
    k_effective: int
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def truncated(self) -> bool:
        return self.k_effective < self.k_requested

    @property
    def saved(self) -> int:
        return self.report.saved

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method,
            'k': self.k_requested,
            'plan': list(self.plan.times),
            'saved': self.report.saved,
            'baseline': self.report.baseline,
            'reduction': float(self.report.reduction),
            'elapsed_ms': round(self.elapsed * 1000.0, 3),
            'k_effective': self.k_effective,
            'truncated': self.truncated,
            'details': self.details,
        }


@dataclass(frozen=True, eq=False)
class DpTables:
    """Dynamic-programming tables over nodes 0..n.

    Node 0 is the reset at t_start, nodes 1..n-1 the candidate steps and node n
    the exit at t_end. T[i, j] is the best path weight from node 0 to node i with
    at most j inner nodes; X[i, j] the chosen predecessor offset (0 = no extra node).
    """

    T: np.ndarray
    X: np.ndarray
    node_times: np.ndarray

    @property
    def n(self) -> int:
        return int(self.node_times.shape[0]) - 1


def finish_result(d: FaultDistribution, plan: CheckpointPlan, method: str, started: float,
                  k_requested: int, details: Optional[Dict[str, Any]] = None) -> PlacementResult:
    report = savings(d, plan)
    return PlacementResult(
        plan=plan,
        report=report,
        method=method,
        elapsed=time.perf_counter() - started,
        k_requested=k_requested,
        k_effective=plan.k,
        details=details or {},
    )


def _check_k(k: int):
    if k < 0:
        raise ValueError(f"Checkpoint count k must be non-negative, got {k}")


def uniform_positions(d: FaultDistribution, k: int) -> CheckpointPlan:
    """t_start + round_half_up(i * span / (k + 1)) for i = 1..k, deduplicated."""
    _check_k(k)
    span = d.span
    positions = []
    for i in range(1, k + 1):
        offset = (2 * i * span + (k + 1)) // (2 * (k + 1))
        t = d.t_start + offset
        if d.t_start < t < d.t_end:
            positions.append(t)
    return CheckpointPlan.from_times(positions)


def uniform_placement(d: FaultDistribution, k: int, snap: bool = False) -> PlacementResult:
    """Evenly spaced checkpoints, oblivious to the distribution unless ``snap`` is set."""
    started = time.perf_counter()
    plan = uniform_positions(d, k)
    method = PlacementMethod.UNIFORM.value
    if snap:
        plan = snap_to_steps(d, plan)
        method = "uniform-snapped"
    if plan.k < k:
        logger.debug(f"Uniform placement yields {plan.k} of {k} checkpoints on span {d.span}")
    return finish_result(d, plan, method, started, k)


def _node_arrays(table: StepTable) -> Tuple[np.ndarray, np.ndarray]:
    node_times = np.concatenate(([table.t_start], table.times, [table.t_end])).astype(np.int64)
    node_heights = np.concatenate(([0], table.heights, [0])).astype(np.int64)
    return node_times, node_heights


def _fill_tables(table: StepTable, k: int, keep_table: bool):
    """Fill X (and optionally all of T) row by row; returns (T rows, X, node_times)."""
    node_times, node_heights = _node_arrays(table)
    n = node_times.shape[0] - 1

    X = np.zeros((n + 1, k + 1), dtype=np.int32)
    previous = (node_times - node_times[0]) * node_heights
    previous[0] = 0
    X[:, 0] = np.arange(n + 1)
    rows = [previous.copy()] if keep_table else None

    for j in range(1, k + 1):
        current = np.zeros_like(previous)
        for i in range(1, n + 1):
            candidates = previous[:i] + (node_times[i] - node_times[:i]) * node_heights[i]
            p = int(np.argmax(candidates))
            best = candidates[p]
            if previous[i] >= best:
                current[i] = previous[i]
            else:
                current[i] = best
                X[i, j] = i - p
        previous = current
        if keep_table:
            rows.append(current.copy())

    T = np.stack(rows, axis=1) if keep_table else previous
    return T, X, node_times


def _backtrack(X: np.ndarray, k: int) -> list:
    """Inner nodes of the best path ending at the exit node, in time order."""
    i, j = X.shape[0] - 1, k
    nodes = []
    while i > 0:
        x = int(X[i, j])
        if x == 0:
            j -= 1
            continue
        p = i - x
        if p > 0:
            nodes.append(p)
        i, j = p, j - 1
    nodes.reverse()
    return nodes


def dp_tables(d: FaultDistribution, k: int) -> DpTables:
    """Full T and X tables for k' = min(k, n) checkpoints."""
    _check_k(k)
    table = step_table(d)
    k_eff = min(k, table.size)
    T, X, node_times = _fill_tables(table, k_eff, keep_table=True)
    return DpTables(T=T, X=X, node_times=node_times)


def dp_placement(d: FaultDistribution, k: int) -> PlacementResult:
    """Optimal k' = min(k, n) checkpoints by dynamic programming over candidate steps."""
    _check_k(k)
    started = time.perf_counter()
    table = step_table(d)
    k_eff = min(k, table.size)
    if k_eff < k:
        logger.info(f"Only {table.size} candidate steps, placing {k_eff} of {k} checkpoints")

    last_row, X, _ = _fill_tables(table, k_eff, keep_table=False)
    nodes = _backtrack(X, k_eff)
    if len(nodes) != k_eff:
        raise InvariantViolation(f"Backtracking recovered {len(nodes)} checkpoints, expected {k_eff}")

    plan = table.plan([p - 1 for p in nodes])
    rss_mb = psutil.Process().memory_info().rss / (1024 * 1024)
    result = finish_result(d, plan, PlacementMethod.DP.value, started, k,
                           details={'steps': table.size, 'rss_mb': round(rss_mb, 1)})

    if result.report.saved != int(last_row[-1]):
        raise InvariantViolation(
            f"DP optimum {int(last_row[-1])} disagrees with plan savings {result.report.saved}"
        )
    logger.info(f"DP over {table.size} steps, k={k_eff}: saved {result.saved} in {result.elapsed:.3f}s")
    return result


def exhaustive_placement(d: FaultDistribution, k: int, budget: Optional[int] = None) -> PlacementResult:
    """Evaluate every k-subset of candidate steps; lexicographically smallest maximum wins."""
    _check_k(k)
    budget = DEFAULT_EXHAUSTIVE_BUDGET if budget is None else budget
    started = time.perf_counter()
    table = step_table(d)
    k_eff = min(k, table.size)

    combinations = math.comb(table.size, k_eff)
    if combinations > budget:
        raise BudgetExceededError(
            f"C({table.size}, {k_eff}) = {combinations} combinations exceed the enumeration "
            f"budget of {budget}; use dp_placement instead"
        )

    best_value, best_subset = -1, ()
    if k_eff == 0:
        best_subset = ()
    else:
        subsets = itertools.combinations(range(table.size), k_eff)
        while True:
            chunk = list(itertools.islice(subsets, _ENUMERATION_CHUNK))
            if not chunk:
                break
            genomes = np.asarray(chunk, dtype=np.int64)
            values = table.saved_many(genomes)
            index = int(np.argmax(values))
            if values[index] > best_value:
                best_value, best_subset = int(values[index]), chunk[index]

    plan = table.plan(best_subset)
    return finish_result(d, plan, PlacementMethod.EXHAUSTIVE.value, started, k,
                         details={'combinations': combinations})


def checkpoints_to_match(d: FaultDistribution, target_saved: int, k_max: int,
                         placer: Optional[Callable[[FaultDistribution, int], PlacementResult]] = None
                         ) -> Optional[int]:
    """Smallest k whose placement saves at least ``target_saved`` cycles, or None up to k_max."""
    if placer is None:
        tables = dp_tables(d, k_max)
        reached = np.nonzero(tables.T[-1] >= target_saved)[0]
        return int(reached[0]) if reached.size else None

    for k in range(0, k_max + 1):
        if placer(d, k).saved >= target_saved:
            return k
    return None
