"""
Genetic checkpoint selection.

Genomes are k-sized vectors of candidate-step indices; fitness is the saved
forwarding cycles of the plan they encode. Independent islands with derived
seeds search in parallel and the globally best plan wins.
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil

from distribution_core import (
    CheckpointPlan,
    FaultDistribution,
    StepTable,
    step_table,
)
from placement import PlacementMethod, PlacementResult, finish_result, uniform_placement

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


class GaConfigError(ValueError):
    """Raised for inconsistent genetic-search settings."""


class MutationOperator(Enum):
    SHIFT_ONE = 1
    SHIFT_THREE = 2
    RANDOM_STEP = 3
    MIDPOINT = 4


def default_islands() -> int:
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


@dataclass(frozen=True)
class Genome:
    """Sorted, distinct candidate-step indices."""

    genes: Tuple[int, ...]

    def is_canonical(self, n_steps: int) -> bool:
        return (all(0 <= g < n_steps for g in self.genes)
                and all(a < b for a, b in zip(self.genes, self.genes[1:])))


@dataclass
class GaConfig:
    base_population: int = 100
    expanded_population: int = 300
    elite: int = 10
    survivor_exchange_p: float = 0.5
    crossover_p: float = 0.5
    per_mutation_p: float = 0.125
    time_budget: Optional[float] = 10.0
    max_generations: Optional[int] = None
    stall_generations: Optional[int] = None
    islands: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.islands is None:
            self.islands = default_islands()
        if self.time_budget is not None and self.time_budget <= 0:
            self.time_budget = None

        if not (1 <= self.elite < self.base_population <= self.expanded_population):
            raise GaConfigError(
                "Expected 1 <= elite < base_population <= expanded_population, got "
                f"{self.elite}, {self.base_population}, {self.expanded_population}"
            )
        for name in ('survivor_exchange_p', 'crossover_p', 'per_mutation_p'):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise GaConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.crossover_p + 4 * self.per_mutation_p <= 0:
            raise GaConfigError("At least one of crossover_p and per_mutation_p must be positive")
        if self.islands < 1:
            raise GaConfigError(f"islands must be at least 1, got {self.islands}")
        for name in ('max_generations', 'stall_generations'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise GaConfigError(f"{name} must be non-negative, got {value}")
        if self.time_budget is None and self.max_generations is None and self.stall_generations is None:
            raise GaConfigError("Set a time budget, a generation cap or a stall limit")

    @classmethod
    def from_config(cls, config, **overrides) -> "GaConfig":
        values = {name: config.get(f'genetic.{name}') for name in cls.__dataclass_fields__}
        values = {k: v for k, v in values.items() if v is not None}
        values.update({k: v for k, v in overrides.items() if v is not None})
        # a generation cap without an explicit budget means a reproducible run
        if overrides.get('max_generations') is not None and overrides.get('time_budget') is None:
            values['time_budget'] = None
        return cls(**values)

    @property
    def operator_probabilities(self) -> np.ndarray:
        """Crossover followed by the four mutation operators, normalized to sum to 1."""
        weights = np.array([self.crossover_p] + [self.per_mutation_p] * 4, dtype=float)
        return weights / weights.sum()


@dataclass
class IslandOutcome:
    island: int
    genome: np.ndarray
    fitness: int
    initial_genome: np.ndarray
    initial_fitness: int
    generations: int
    last_improvement_generation: int
    last_improvement_seconds: float
    trace: List[Tuple[int, int, float]] = field(default_factory=list)


class GeneticSearch:
    """Population operators over one step table and a fixed genome length."""

    def __init__(self, table: StepTable, k: int, cfg: GaConfig):
        if not (1 <= k <= table.size):
            raise GaConfigError(f"Genome length {k} must lie in [1, {table.size}]")
        self.table = table
        self.k = k
        self.cfg = cfg
        self.n_steps = table.size

    def fitness(self, genomes: np.ndarray) -> np.ndarray:
        return self.table.saved_many(genomes)

    def random_genomes(self, count: int, rng: np.random.Generator) -> np.ndarray:
        genomes = np.empty((count, self.k), dtype=np.int64)
        for row in range(count):
            genomes[row] = np.sort(rng.choice(self.n_steps, size=self.k, replace=False))
        return genomes

    def canonicalize(self, genes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sort, deduplicate and refill with random unused steps up to length k."""
        unique = np.unique(genes)
        missing = self.k - unique.shape[0]
        if missing == 0:
            return unique
        if self.n_steps > 4 * self.k:
            taken = set(unique.tolist())
            extra = []
            while len(extra) < missing:
                candidate = int(rng.integers(self.n_steps))
                if candidate not in taken:
                    taken.add(candidate)
                    extra.append(candidate)
        else:
            unused = np.setdiff1d(np.arange(self.n_steps), unique, assume_unique=True)
            extra = rng.choice(unused, size=missing, replace=False)
        return np.sort(np.concatenate((unique, np.asarray(extra, dtype=np.int64))))

    def canonicalize_many(self, genomes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Row-wise ``canonicalize`` of a (count, k) matrix."""
        genomes = np.sort(genomes, axis=1)
        while True:
            repeated = np.zeros(genomes.shape, dtype=bool)
            repeated[:, 1:] = genomes[:, 1:] == genomes[:, :-1]
            if not repeated.any():
                return genomes
            if self.n_steps <= 4 * self.k:
                for row in np.flatnonzero(repeated.any(axis=1)):
                    genomes[row] = self.canonicalize(genomes[row], rng)
                return genomes
            # redraw repeats until every row is distinct; cheap while steps outnumber genes
            genomes[repeated] = rng.integers(self.n_steps, size=int(repeated.sum()))
            genomes.sort(axis=1)

    def crossover(self, a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Two-point crossover of two sorted genomes."""
        return self.crossover_many(a[np.newaxis], b[np.newaxis], rng)[0]

    def crossover_many(self, a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Row-wise two-point crossover: genes in [first, second) come from ``b``."""
        points = np.sort(rng.integers(0, self.k + 1, size=(a.shape[0], 2)), axis=1)
        columns = np.arange(self.k)
        from_b = (columns >= points[:, :1]) & (columns < points[:, 1:])
        return np.where(from_b, b, a)

    def mutate(self, genome: np.ndarray, operator: MutationOperator,
               rng: np.random.Generator) -> np.ndarray:
        return self.mutate_many(genome[np.newaxis], np.array([operator.value]), rng)[0]

    def mutate_many(self, parents: np.ndarray, operators: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
        """Apply one mutation per row; ``operators`` holds ``MutationOperator`` values."""
        count = parents.shape[0]
        rows = np.arange(count)
        j = rng.integers(self.k, size=count)
        direction = np.where(rng.random(count) < 0.5, 1, -1)
        random_step = rng.integers(self.n_steps, size=count)

        genes = parents[rows, j]
        times = self.table.times
        left = np.where(j > 0, times[parents[rows, np.maximum(j - 1, 0)]], self.table.t_start)
        right = np.where(j < self.k - 1, times[parents[rows, np.minimum(j + 1, self.k - 1)]], self.table.t_end)
        midpoint = np.searchsorted(times, (left + right) // 2, side='left')

        moved = np.select(
            [operators == MutationOperator.SHIFT_ONE.value,
             operators == MutationOperator.SHIFT_THREE.value,
             operators == MutationOperator.RANDOM_STEP.value],
            [genes + direction, genes + 3 * direction, random_step],
            default=midpoint,
        )
        children = parents.copy()
        children[rows, j] = np.clip(moved, 0, self.n_steps - 1)
        return children

    def tournament(self, fitness: np.ndarray, rng: np.random.Generator, count: int = 1) -> np.ndarray:
        """Winners of ``count`` binary tournaments (ties go to the first contender)."""
        a, b = rng.integers(fitness.shape[0], size=(2, count))
        return np.where(fitness[a] >= fitness[b], a, b)

    def rank(self, genomes: np.ndarray, fitness: np.ndarray) -> np.ndarray:
        """Indices ordered by fitness descending, then lexicographic genome."""
        keys = tuple(genomes[:, c] for c in reversed(range(self.k))) + (-fitness,)
        return np.lexsort(keys)

    def evolve(self, genomes: np.ndarray, fitness: np.ndarray,
               rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """One generation: expand by crossover/mutation, rank, keep the elite, exchange the rest."""
        cfg = self.cfg
        offspring_count = cfg.expanded_population - genomes.shape[0]
        choices = rng.choice(5, size=offspring_count, p=cfg.operator_probabilities)

        offspring = np.empty((offspring_count, self.k), dtype=np.int64)
        crossing = np.flatnonzero(choices == 0)
        if crossing.size:
            a = genomes[self.tournament(fitness, rng, crossing.size)]
            b = genomes[self.tournament(fitness, rng, crossing.size)]
            offspring[crossing] = self.crossover_many(a, b, rng)
        mutating = np.flatnonzero(choices != 0)
        if mutating.size:
            parents = genomes[rng.integers(genomes.shape[0], size=mutating.size)]
            offspring[mutating] = self.mutate_many(parents, choices[mutating], rng)
        offspring = self.canonicalize_many(offspring, rng)

        pool = np.vstack((genomes, offspring))
        pool_fitness = np.concatenate((fitness, self.fitness(offspring)))
        order = self.rank(pool, pool_fitness)

        # ranks elite..base-1 each swap with probability p against distinct tail ranks
        tail = np.arange(cfg.base_population, pool.shape[0])
        exchanged = cfg.elite + np.flatnonzero(rng.random(cfg.base_population - cfg.elite) < cfg.survivor_exchange_p)
        if tail.size and exchanged.size:
            partners = rng.choice(tail, size=min(exchanged.size, tail.size), replace=False)
            exchanged = exchanged[:partners.size]
            order[exchanged], order[partners] = order[partners], order[exchanged]

        survivors = order[:cfg.base_population]
        return pool[survivors], pool_fitness[survivors]

    def run_island(self, island: int) -> IslandOutcome:
        cfg = self.cfg
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed & SEED_MASK, island]))
        started = time.perf_counter()

        genomes = self.random_genomes(cfg.base_population, rng)
        fitness = self.fitness(genomes)
        order = self.rank(genomes, fitness)
        genomes, fitness = genomes[order], fitness[order]

        best_genome, best_fitness = genomes[0].copy(), int(fitness[0])
        initial_genome, initial_fitness = best_genome.copy(), best_fitness
        trace = [(0, best_fitness, float(np.median(fitness)))]
        generation = 0
        last_generation, last_seconds = 0, 0.0

        while True:
            if cfg.max_generations is not None and generation >= cfg.max_generations:
                break
            if cfg.time_budget is not None and time.perf_counter() - started >= cfg.time_budget:
                break
            if cfg.stall_generations is not None and generation - last_generation >= cfg.stall_generations:
                break

            genomes, fitness = self.evolve(genomes, fitness, rng)
            generation += 1
            if int(fitness[0]) > best_fitness:
                best_genome, best_fitness = genomes[0].copy(), int(fitness[0])
                last_generation, last_seconds = generation, time.perf_counter() - started
            trace.append((generation, best_fitness, float(np.median(fitness))))

        logger.debug(f"Island {island}: {generation} generations, best {best_fitness} "
                     f"(last improvement at generation {last_generation})")
        return IslandOutcome(
            island=island,
            genome=best_genome,
            fitness=best_fitness,
            initial_genome=initial_genome,
            initial_fitness=initial_fitness,
            generations=generation,
            last_improvement_generation=last_generation,
            last_improvement_seconds=round(last_seconds, 4),
            trace=trace,
        )

    def run(self) -> List[IslandOutcome]:
        """All islands concurrently, returned in island order."""
        with ThreadPoolExecutor(max_workers=self.cfg.islands) as executor:
            return list(executor.map(self.run_island, range(self.cfg.islands)))


def append_fitness_trace(path: str, trace: Sequence[Tuple[int, int, float]]):
    """Append ``generation,best,median`` rows, writing the header for a new file."""
    path = Path(path)
    frame = pd.DataFrame(list(trace), columns=['generation', 'best', 'median'])
    write_header = not path.exists() or path.stat().st_size == 0
    frame.to_csv(path, mode='a', header=write_header, index=False, lineterminator='\n')


def evolve_generation(population: Sequence[Genome], d: FaultDistribution, cfg: GaConfig,
                      rng: np.random.Generator) -> List[Genome]:
    """Evolve one generation of canonical genomes over the steps of ``d``."""
    if len(population) != cfg.base_population:
        raise GaConfigError(f"Expected {cfg.base_population} genomes, got {len(population)}")
    search = GeneticSearch(step_table(d), len(population[0].genes), cfg)
    genomes = np.asarray([g.genes for g in population], dtype=np.int64)
    evolved, _ = search.evolve(genomes, search.fitness(genomes), rng)
    return [Genome(tuple(int(g) for g in row)) for row in evolved]


def genetic_placement(d: FaultDistribution, k: int, cfg: GaConfig,
                      trace_path: Optional[str] = None) -> PlacementResult:
    """Island-parallel genetic search, floored by the snapped uniform and best initial plans."""
    if k < 0:
        raise ValueError(f"Checkpoint count k must be non-negative, got {k}")
    started = time.perf_counter()
    method = PlacementMethod.GENETIC.value
    table = step_table(d)
    k_eff = min(k, table.size)

    if k_eff == 0:
        return finish_result(d, CheckpointPlan(), method, started, k, details={'source': 'degenerate'})
    if k_eff == table.size:
        plan = table.plan(range(table.size))
        return finish_result(d, plan, method, started, k, details={'source': 'all-steps'})

    search = GeneticSearch(table, k_eff, cfg)
    logger.info(f"Genetic search over {table.size} steps, k={k_eff}, {cfg.islands} islands, seed {cfg.seed}")
    outcomes = search.run()

    winner = outcomes[0]
    for outcome in outcomes[1:]:
        if outcome.fitness > winner.fitness:
            winner = outcome
    initial = max(outcomes, key=lambda o: o.initial_fitness)

    uniform = uniform_placement(d, k, snap=True)
    candidates = [
        ('evolved', winner.fitness, table.plan(winner.genome)),
        ('uniform', uniform.saved, uniform.plan),
        ('initial', initial.initial_fitness, table.plan(initial.initial_genome)),
    ]
    source, _, plan = candidates[0]
    best = candidates[0][1]
    for name, value, candidate_plan in candidates[1:]:
        if value > best:
            source, best, plan = name, value, candidate_plan

    if trace_path:
        append_fitness_trace(trace_path, winner.trace)

    details: Dict[str, Any] = {
        'source': source,
        'islands': cfg.islands,
        'winning_island': winner.island,
        'generations': winner.generations,
        'last_improvement_generation': winner.last_improvement_generation,
        'last_improvement_seconds': winner.last_improvement_seconds,
    }
    result = finish_result(d, plan, method, started, k, details=details)
    logger.info(f"Genetic search finished: saved {result.saved} ({source}) in {result.elapsed:.2f}s")
    return result
