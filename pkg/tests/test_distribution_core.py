import numpy as np
import pytest

from conftest import random_distribution
from distribution_core import (
    CheckpointPlan,
    DistributionError,
    DistributionRangeError,
    FaultDistribution,
    PlanRangeError,
    Population,
    StepTable,
    baseline_forward_cycles,
    build_distribution,
    candidate_steps,
    oracle_savings,
    population,
    relocation_gain,
    savings,
    snap_to_steps,
    step_table,
)


class TestBuildDistribution:
    def test_direct_construction(self, tiny):
        assert tiny.entries == ((0, 2), (1, 1), (3, 1))
        assert tiny.total == 4
        assert tiny.span == 4

    def test_sorts_merges_and_drops_zero_counts(self, tiny):
        d = build_distribution([(3, 1), (0, 2), (0, 0), (1, 1)], 0, 4)
        assert d == tiny

    def test_merges_duplicate_times(self):
        d = build_distribution([(2, 1), (2, 3)], 0, 5)
        assert d.entries == ((2, 4),)

    def test_time_at_t_end_is_rejected(self):
        with pytest.raises(DistributionError, match=r"\(4, 1\)"):
            build_distribution([(4, 1)], 0, 4)

    def test_inverted_range(self):
        with pytest.raises(DistributionRangeError):
            build_distribution([(0, 1)], 5, 5)

    def test_negative_count(self):
        with pytest.raises(DistributionError):
            build_distribution([(1, -1)], 0, 4)

    def test_no_faults(self):
        with pytest.raises(DistributionError):
            build_distribution([(1, 0)], 0, 4)

    @pytest.mark.parametrize('pair', [(2.7, 1), (2, 1.5), ('2', 1), (float('nan'), 1)])
    def test_non_integral_values_are_rejected(self, pair):
        with pytest.raises(DistributionError, match="not an integer"):
            build_distribution([pair], 0, 4)

    def test_integral_numpy_and_float_values_are_accepted(self):
        d = build_distribution([(np.int64(2), np.int32(3)), (1.0, 2.0)], 0, 4)
        assert d.entries == ((1, 2), (2, 3))

    def test_direct_constructor_rejects_unsorted_entries(self):
        with pytest.raises(DistributionError):
            FaultDistribution(0, 10, ((3, 1), (2, 1)))

    def test_numpy_views_are_read_only(self, tiny):
        assert tiny.times.tolist() == [0, 1, 3]
        assert tiny.counts.tolist() == [2, 1, 1]
        with pytest.raises(ValueError):
            tiny.times[0] = 7

    def test_scaled(self, tiny):
        assert tiny.scaled(3).entries == ((0, 6), (1, 3), (3, 3))


class TestPopulation:
    def test_values(self, tiny):
        p = population(tiny)
        assert [p(t) for t in range(5)] == [4, 2, 1, 1, 0]

    def test_single_step(self):
        p = population(build_distribution([(0, 5)], 0, 1))
        assert p(0) == 5
        assert p(1) == 0

    def test_zero_at_t_end(self, rng):
        for _ in range(50):
            d = random_distribution(rng)
            assert population(d)(d.t_end) == 0

    def test_non_increasing(self, rng):
        d = random_distribution(rng, max_entries=40)
        values = population(d).values_at(range(d.t_start, d.t_end + 1))
        assert np.all(np.diff(values) <= 0)
        assert values[0] == d.total

    def test_outside_range(self, tiny):
        with pytest.raises(DistributionError):
            population(tiny)(5)

    def test_vectorized_outside_range(self):
        p = population(build_distribution([(5, 2), (8, 1)], 3, 10))
        assert p.values_at([3, 6, 10]).tolist() == [3, 1, 0]
        with pytest.raises(DistributionError, match="t=2"):
            p.values_at([4, 2])
        with pytest.raises(DistributionError, match="t=11"):
            p.values_at([11])


class TestBaselineAndSteps:
    def test_baseline(self, tiny):
        assert baseline_forward_cycles(tiny) == 4

    def test_baseline_all_at_reset(self):
        assert baseline_forward_cycles(build_distribution([(0, 5)], 0, 1)) == 0

    def test_baseline_single_fault(self):
        assert baseline_forward_cycles(build_distribution([(9, 1)], 0, 10)) == 9

    def test_candidate_steps(self, tiny):
        assert candidate_steps(tiny) == [1, 3]
        assert candidate_steps(build_distribution([(0, 5)], 0, 1)) == []
        assert candidate_steps(build_distribution([(2, 1), (7, 3)], 0, 8)) == [2, 7]

    def test_step_table_heights(self, tiny):
        table = step_table(tiny)
        assert table.times.tolist() == [1, 3]
        assert table.heights.tolist() == [2, 1]
        assert table.saved([0, 1]) == 4
        assert table.saved_many(np.array([[0], [1]])).tolist() == [2, 3]


@pytest.mark.parametrize("helper", [StepTable.saved, StepTable.saved_many, step_table, Population.values_at])
def test_step_helpers_are_documented(helper):
    assert helper.__doc__


class TestSavings:
    def test_single_checkpoint(self, tiny):
        report = savings(tiny, CheckpointPlan((3,)))
        assert report.saved == 3
        assert report.baseline == 4
        assert float(report.reduction) == 0.75

    def test_checkpoint_on_every_step(self, tiny):
        report = savings(tiny, CheckpointPlan((1, 3)))
        assert report.saved == 4
        assert report.remaining == 0
        assert [(r.left, r.right, r.height, r.area) for r in report.rectangles] == [(0, 1, 2, 2), (1, 3, 1, 2)]

    def test_empty_plan(self, tiny):
        assert savings(tiny, CheckpointPlan()).saved == 0

    def test_zero_baseline_reduction(self):
        d = build_distribution([(0, 5)], 0, 3)
        assert savings(d, CheckpointPlan((1,))).reduction == 0

    def test_checkpoint_out_of_range(self, tiny):
        with pytest.raises(PlanRangeError):
            savings(tiny, CheckpointPlan((4,)))
        with pytest.raises(PlanRangeError):
            savings(tiny, CheckpointPlan((0,)))

    def test_plan_must_be_increasing(self):
        with pytest.raises(DistributionError):
            CheckpointPlan((3, 1))

    def test_oracle_examples(self, tiny):
        assert oracle_savings(tiny, CheckpointPlan((3,))) == 3
        assert oracle_savings(tiny, CheckpointPlan((2,))) == 2
        assert oracle_savings(tiny, CheckpointPlan()) == 0

    def test_adding_a_checkpoint_never_loses(self, rng):
        for _ in range(500):
            d = random_distribution(rng, max_entries=60, max_span=300)
            free = np.arange(d.t_start + 1, d.t_end)
            if free.shape[0] < 2:
                continue
            k = int(rng.integers(0, min(8, free.shape[0] - 1) + 1))
            chosen = rng.choice(free, size=k + 1, replace=False).tolist()
            plan = CheckpointPlan.from_times(chosen[:k])
            refined = CheckpointPlan.from_times(chosen)
            assert savings(d, refined).saved >= savings(d, plan).saved

    def test_matches_oracle_on_random_plans(self, rng):
        for _ in range(1000):
            d = random_distribution(rng, max_entries=100, max_span=400)
            if d.span < 2:
                continue
            k = int(rng.integers(0, min(10, d.span - 1) + 1))
            plan = CheckpointPlan.from_times(rng.choice(np.arange(1, d.span), size=k, replace=False).tolist())
            assert savings(d, plan).saved == oracle_savings(d, plan)


class TestRelocation:
    def test_snap_example(self, tiny):
        plan = CheckpointPlan((2,))
        snapped = snap_to_steps(tiny, plan)
        assert snapped.times == (3,)
        assert savings(tiny, plan).saved == 2
        assert savings(tiny, snapped).saved == 3

    def test_snap_fixed_point(self, tiny):
        assert snap_to_steps(tiny, CheckpointPlan((1, 3))).times == (1, 3)

    def test_snap_deduplicates(self, tiny):
        assert snap_to_steps(tiny, CheckpointPlan((2, 3))).times == (3,)

    def test_snap_drops_checkpoints_behind_last_step(self):
        d = build_distribution([(0, 1), (3, 2)], 0, 10)
        assert snap_to_steps(d, CheckpointPlan((2, 6))).times == (3,)

    def test_snap_never_decreases_savings(self, rng):
        for _ in range(1000):
            d = random_distribution(rng, max_entries=30, max_span=300)
            if d.span < 2:
                continue
            k = int(rng.integers(1, min(8, d.span - 1) + 1))
            plan = CheckpointPlan.from_times(rng.choice(np.arange(1, d.span), size=k, replace=False).tolist())
            assert savings(d, snap_to_steps(d, plan)).saved >= savings(d, plan).saved

    def test_gain_of_last_checkpoint(self, tiny):
        assert relocation_gain(tiny, CheckpointPlan((2,)), 0) == (3 - 2) * 1

    def test_gain_on_step_is_zero(self, tiny):
        assert relocation_gain(tiny, CheckpointPlan((1,)), 0) == 0

    def test_gain_rejects_checkpoint_in_between(self):
        d = build_distribution([(0, 1), (5, 1)], 0, 10)
        with pytest.raises(DistributionError):
            relocation_gain(d, CheckpointPlan((1, 3)), 0)

    def test_gain_is_exact(self, rng):
        checked = 0
        while checked < 1000:
            d = random_distribution(rng, max_entries=20, max_span=200)
            steps = candidate_steps(d)
            if d.span < 3 or not steps:
                continue
            k = int(rng.integers(1, min(6, d.span - 1) + 1))
            plan = CheckpointPlan.from_times(rng.choice(np.arange(1, d.span), size=k, replace=False).tolist())
            p = population(d)
            for index, c in enumerate(plan.times):
                following = plan.times[index + 1] if index + 1 < plan.k else None
                larger = [s for s in steps if s >= c]
                if not larger or larger[0] == c:
                    continue
                s = larger[0]
                if following is not None and following < s:
                    continue
                moved = CheckpointPlan.from_times([s if t == c else t for t in plan.times])
                gain = relocation_gain(d, plan, index)
                assert gain == oracle_savings(d, moved) - oracle_savings(d, plan)
                assert gain >= 0
                if following is None:
                    assert gain == (s - c) * p(s)
                checked += 1
