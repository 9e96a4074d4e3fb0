"""
Fault-injection distributions and the savings arithmetic behind checkpoint placement.
Every placement strategy, exporter and test oracle works on these types.
"""

import bisect
import logging
from dataclasses import dataclass, asdict
from fractions import Fraction
from functools import cached_property
from typing import Iterable, List, Sequence, Tuple, Dict, Any

import numpy as np

logger = logging.getLogger(__name__)


class DistributionError(ValueError):
    """Raised when a distribution or plan fails validation."""


class DistributionRangeError(DistributionError):
    """Raised for an empty or inverted time range."""


class PlanRangeError(DistributionError):
    """Raised when a checkpoint lies outside (t_start, t_end)."""


class InvariantViolation(AssertionError):
    """An internal invariant did not hold. Always a bug."""


@dataclass(frozen=True)
class FaultDistribution:
    """Discrete histogram D(t) of planned injections over [t_start, t_end)."""

    t_start: int
    t_end: int
    entries: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise DistributionRangeError(
                f"t_end ({self.t_end}) must be greater than t_start ({self.t_start})"
            )
        if self.t_start < 0:
            raise DistributionRangeError(f"t_start must be non-negative, got {self.t_start}")
        if not self.entries:
            raise DistributionError("Distribution holds no faults")

        previous = None
        for time, count in self.entries:
            if not (self.t_start <= time < self.t_end):
                raise DistributionError(
                    f"Entry ({time}, {count}) lies outside [{self.t_start}, {self.t_end})"
                )
            if count < 1:
                raise DistributionError(f"Entry ({time}, {count}) has a non-positive count")
            if previous is not None and time <= previous:
                raise DistributionError(f"Entry ({time}, {count}) is not strictly increasing in time")
            previous = time

    @cached_property
    def times(self) -> np.ndarray:
        times = np.fromiter((t for t, _ in self.entries), dtype=np.int64, count=len(self.entries))
        times.flags.writeable = False
        return times

    @cached_property
    def counts(self) -> np.ndarray:
        counts = np.fromiter((c for _, c in self.entries), dtype=np.int64, count=len(self.entries))
        counts.flags.writeable = False
        return counts

    @cached_property
    def total(self) -> int:
        """Total fault count F."""
        return sum(c for _, c in self.entries)

    @property
    def span(self) -> int:
        return self.t_end - self.t_start

    def scaled(self, factor: int) -> "FaultDistribution":
        """Every count multiplied by a positive integer."""
        if factor < 1:
            raise DistributionError(f"Scale factor must be positive, got {factor}")
        return FaultDistribution(self.t_start, self.t_end, tuple((t, c * factor) for t, c in self.entries))


@dataclass(frozen=True)
class Population:
    """Non-increasing step function P(t): experiments still forwarding at cycle t."""

    steps: Tuple[Tuple[int, int], ...]
    total: int
    t_end: int

    @cached_property
    def _step_times(self) -> List[int]:
        return [t for t, _ in self.steps]

    def value_at(self, t: int) -> int:
        """Value of the latest step at or before t."""
        t_start = self.steps[0][0]
        if t < t_start or t > self.t_end:
            raise DistributionError(f"P is defined on [{t_start}, {self.t_end}], got t={t}")
        index = bisect.bisect_right(self._step_times, t) - 1
        return self.steps[index][1]

    __call__ = value_at

    def values_at(self, times: Sequence[int]) -> np.ndarray:
        """Vectorized ``value_at``; every time must lie in [t_start, t_end]."""
        step_times = np.asarray(self._step_times, dtype=np.int64)
        values = np.asarray([v for _, v in self.steps], dtype=np.int64)
        queries = np.asarray(times, dtype=np.int64)
        outside = (queries < step_times[0]) | (queries > self.t_end)
        if outside.any():
            raise DistributionError(
                f"P is defined on [{step_times[0]}, {self.t_end}], got t={int(queries[outside][0])}"
            )
        index = np.searchsorted(step_times, queries, side='right') - 1
        return values[index]


@dataclass(frozen=True)
class CheckpointPlan:
    """Sorted, distinct checkpoint times; the reset at t_start is implicit."""

    times: Tuple[int, ...] = ()

    def __post_init__(self):
        for left, right in zip(self.times, self.times[1:]):
            if right <= left:
                raise DistributionError(f"Checkpoint times must be strictly increasing: {self.times}")

    @classmethod
    def from_times(cls, times: Iterable[int]) -> "CheckpointPlan":
        """Sort and deduplicate arbitrary checkpoint times."""
        return cls(tuple(sorted({int(t) for t in times})))

    @property
    def k(self) -> int:
        return len(self.times)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    def validate_against(self, d: FaultDistribution):
        for t in self.times:
            if not (d.t_start < t < d.t_end):
                raise PlanRangeError(
                    f"Checkpoint at {t} lies outside ({d.t_start}, {d.t_end})"
                )


@dataclass(frozen=True)
class Rectangle:
    left: int
    right: int
    height: int
    area: int


@dataclass(frozen=True)
class SavingsReport:
    """Saved forwarding cycles of a plan together with its rectangle breakdown."""

    saved: int
    baseline: int
    rectangles: Tuple[Rectangle, ...]

    @property
    def remaining(self) -> int:
        return self.baseline - self.saved

    @property
    def reduction(self) -> Fraction:
        if self.baseline == 0:
            return Fraction(0)
        return Fraction(self.saved, self.baseline)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'saved': self.saved,
            'baseline': self.baseline,
            'remaining': self.remaining,
            'reduction': float(self.reduction),
            'rectangles': [asdict(r) for r in self.rectangles],
        }


@dataclass(frozen=True, eq=False)
class StepTable:
    """Candidate steps with their population heights, for fast plan scoring.

    Plans are given as indices into ``times``. Heights are P(times[i]).
    """

    t_start: int
    t_end: int
    times: np.ndarray
    heights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.times.shape[0])

    def saved(self, indices: Sequence[int]) -> int:
        """Saved cycles of one plan given as increasing step indices."""
        if len(indices) == 0:
            return 0
        idx = np.asarray(indices, dtype=np.int64)
        times = self.times[idx]
        previous = np.concatenate(([self.t_start], times[:-1]))
        return int(((times - previous) * self.heights[idx]).sum())

    def saved_many(self, genomes: np.ndarray) -> np.ndarray:
        """Savings of every row of a (count, k) matrix of sorted step indices."""
        times = self.times[genomes]
        previous = np.empty_like(times)
        previous[:, 0] = self.t_start
        previous[:, 1:] = times[:, :-1]
        return ((times - previous) * self.heights[genomes]).sum(axis=1)

    def plan(self, indices: Sequence[int]) -> CheckpointPlan:
        return CheckpointPlan.from_times(int(self.times[i]) for i in indices)


def _integral(value, what: str) -> int:
    try:
        number = int(value)
    except (TypeError, ValueError, OverflowError):
        raise DistributionError(f"Fault {what} {value!r} is not an integer") from None
    if number != value:
        raise DistributionError(f"Fault {what} {value!r} is not an integer")
    return number


def build_distribution(pairs: Iterable[Tuple[int, int]], t_start: int, t_end: int) -> FaultDistribution:
    """Sort, merge and validate (time, count) pairs into a distribution."""
    if t_end <= t_start:
        raise DistributionRangeError(f"t_end ({t_end}) must be greater than t_start ({t_start})")

    merged: Dict[int, int] = {}
    for raw_time, raw_count in pairs:
        time, count = _integral(raw_time, 'time'), _integral(raw_count, 'count')
        if count < 0:
            raise DistributionError(f"Entry ({time}, {count}) has a negative count")
        if count == 0:
            continue
        if not (t_start <= time < t_end):
            raise DistributionError(f"Entry ({time}, {count}) lies outside [{t_start}, {t_end})")
        merged[time] = merged.get(time, 0) + count

    if not merged:
        raise DistributionError("No fault entries with a positive count")

    return FaultDistribution(t_start, t_end, tuple(sorted(merged.items())))


def population(d: FaultDistribution) -> Population:
    """P(t) = number of faults with t_FI >= t, as a step function."""
    remaining = d.total
    steps = [(d.t_start, remaining)]
    for time, count in d.entries:
        remaining -= count
        steps.append((time + 1, remaining))
    if remaining != 0:
        raise InvariantViolation(f"P(t_end) should be 0, got {remaining}")
    return Population(tuple(steps), d.total, d.t_end)


def baseline_forward_cycles(d: FaultDistribution) -> int:
    """Forwarding cycles of the whole campaign without real checkpoints."""
    return sum((t - d.t_start) * c for t, c in d.entries)


def candidate_steps(d: FaultDistribution) -> List[int]:
    """Entry times after t_start: the only positions worth a checkpoint."""
    return [t for t, _ in d.entries if t != d.t_start]


def step_table(d: FaultDistribution) -> StepTable:
    """Candidate steps of ``d`` paired with P at each step."""
    suffix = np.cumsum(d.counts[::-1])[::-1]
    mask = d.times != d.t_start
    times = np.ascontiguousarray(d.times[mask])
    heights = np.ascontiguousarray(suffix[mask])
    times.flags.writeable = False
    heights.flags.writeable = False
    return StepTable(d.t_start, d.t_end, times, heights)


def savings(d: FaultDistribution, plan: CheckpointPlan) -> SavingsReport:
    """Saved forwarding cycles: sum of (T(C_i+1) - T(C_i)) * P(T(C_i+1)) from C_0 = t_start."""
    plan.validate_against(d)
    p = population(d)

    rectangles = []
    left = d.t_start
    for right in plan.times:
        height = p.value_at(right)
        rectangles.append(Rectangle(left, right, height, (right - left) * height))
        left = right

    saved = sum(r.area for r in rectangles)
    baseline = baseline_forward_cycles(d)
    if saved > baseline:
        raise InvariantViolation(f"Saved cycles {saved} exceed the baseline {baseline}")
    return SavingsReport(saved, baseline, tuple(rectangles))


def oracle_savings(d: FaultDistribution, plan: CheckpointPlan) -> int:
    """Per-fault reference: each fault restores the latest checkpoint at or before it."""
    plan.validate_against(d)
    restore_points = [d.t_start, *plan.times]
    total = 0
    for time, count in d.entries:
        chosen = restore_points[bisect.bisect_right(restore_points, time) - 1]
        total += (chosen - d.t_start) * count
    return total


def snap_to_steps(d: FaultDistribution, plan: CheckpointPlan) -> CheckpointPlan:
    """Move each checkpoint right onto the next candidate step and deduplicate.

    Checkpoints behind the last candidate step cover no fault and are dropped.
    """
    plan.validate_against(d)
    steps = candidate_steps(d)
    snapped = []
    for c in plan.times:
        index = bisect.bisect_left(steps, c)
        if index == len(steps):
            logger.debug(f"Dropping checkpoint {c}: no fault at or after it")
            continue
        snapped.append(steps[index])
    return CheckpointPlan.from_times(snapped)


def relocation_gain(d: FaultDistribution, plan: CheckpointPlan, index: int) -> int:
    """Exact savings change of moving checkpoint ``index`` onto its next candidate step.

    Equals (s - c) * (P(s) - P(T_next)); without a following checkpoint this is
    (s - c) * P(s). No other checkpoint may lie strictly between c and s.
    """
    plan.validate_against(d)
    c = plan.times[index]
    steps = candidate_steps(d)
    position = bisect.bisect_left(steps, c)
    if position == len(steps) or steps[position] == c:
        return 0
    s = steps[position]
    following = plan.times[index + 1] if index + 1 < plan.k else None
    if following is not None and following < s:
        raise DistributionError(
            f"Checkpoint {following} lies between {c} and its next step {s}"
        )
    p = population(d)
    next_height = p.value_at(following) if following is not None else 0
    return (s - c) * (p.value_at(s) - next_height)
