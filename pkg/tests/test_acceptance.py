"""End-to-end properties over synthetic sweeps. Slow; run with ``pytest -m slow``.

The 200-seed sweeps use 1000-step distributions and a capped genetic search
unless ``--full`` is given, which switches to default parameters throughout
(10 000 steps, time-budgeted islands). Expect hours for the full run.
"""

import time

import numpy as np
import pandas as pd
import psutil
import pytest

from genetic import GaConfig, genetic_placement
from metrics import pearson, wfft
from placement import dp_placement, dp_tables, uniform_placement
from synthgen import SynthParams, generate, generate_batch

pytestmark = pytest.mark.slow

SWEEP_SEEDS = range(200)
SWEEP_K = (2, 4, 8, 16)
REDUCED_STEPS = 1000
REDUCED_GENERATIONS = 200


def sweep_search(seed: int, full_size: bool) -> GaConfig:
    if full_size:
        return GaConfig(seed=seed)
    return GaConfig(max_generations=REDUCED_GENERATIONS, time_budget=None, islands=1, seed=seed)


@pytest.fixture(scope="module")
def sweep(full_size):
    params = SynthParams() if full_size else SynthParams(steps=REDUCED_STEPS)
    return generate_batch(params, SWEEP_SEEDS)


@pytest.fixture(scope="module")
def reductions(sweep, full_size):
    rows = []
    for seed, d in zip(SWEEP_SEEDS, sweep):
        for k in SWEEP_K:
            genetic = genetic_placement(d, k, sweep_search(seed, full_size))
            uniform = uniform_placement(d, k)
            rows.append((seed, k, genetic.report.reduction, uniform.report.reduction))
    return pd.DataFrame(rows, columns=['seed', 'k', 'genetic', 'uniform'])


def test_genetic_never_loses_to_uniform(reductions):
    losing = reductions[reductions['genetic'] < reductions['uniform']]
    assert losing.empty, losing[['seed', 'k']].values.tolist()


def test_gains_grow_with_non_uniformity(sweep, reductions):
    at_four = reductions[reductions['k'] == 4].set_index('seed')
    gains = [float(at_four.loc[seed, 'genetic'] - at_four.loc[seed, 'uniform']) for seed in SWEEP_SEEDS]
    scores = [wfft(d).value for d in sweep]
    assert pearson(scores, gains) > 0.3


def test_diminishing_returns(sweep):
    for seed, d in zip(SWEEP_SEEDS, sweep):
        best = dp_tables(d, 16).T[-1]
        assert np.all(np.diff(best) >= 0), seed
        marginal = np.diff(best)
        assert marginal[15] <= marginal[2], seed


def test_wfft_spans_a_wide_range():
    scores = [wfft(d).value for d in generate_batch(SynthParams(), range(100))]
    assert min(scores) > 0
    assert max(scores) / min(scores) >= 5


def test_dp_on_ten_thousand_steps():
    d = generate(SynthParams(steps=10000, seed=1))
    started = time.perf_counter()
    result = dp_placement(d, 16)
    assert time.perf_counter() - started < 60
    assert result.plan.k == 16
    assert psutil.Process().memory_info().rss < 2 * 1024 ** 3


def test_genetic_matches_dp_on_five_hundred_steps():
    started = time.perf_counter()
    exact, ratios = 0, []
    for seed in range(100):
        d = generate(SynthParams(steps=500, seed=seed))
        optimum = dp_placement(d, 8).saved
        cfg = GaConfig(max_generations=2000, time_budget=None, islands=4, seed=seed)
        saved = genetic_placement(d, 8, cfg).saved
        exact += saved == optimum
        ratios.append(saved / optimum)
    assert exact >= 90
    assert min(ratios) >= 0.98
    assert time.perf_counter() - started < 600
