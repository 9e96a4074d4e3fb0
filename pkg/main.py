"""
Orchestrator for checkpoint planning.
Ties the configuration to placement, scoring, ILP export, synthetic generation,
cache simulation and method comparisons.
"""

import logging
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from cachesim import (
    CacheConfig,
    TraceFilter,
    read_trace,
    simulate,
    uncached_distribution,
)
from config import Config
from distribution_core import CheckpointPlan, FaultDistribution, SavingsReport, savings
from distribution_io import read_distribution
from experiment_runner import (
    CacheSimSource,
    ExperimentReport,
    ExperimentRunner,
    ExperimentSpec,
    FileSource,
    SynthSource,
)
from genetic import GaConfig, genetic_placement
from ilp_export import build_ilp, emit_lp, parse_solution
from metrics import NonUniformityScore, wfft
from placement import (
    PlacementMethod,
    PlacementResult,
    checkpoints_to_match,
    dp_placement,
    exhaustive_placement,
    finish_result,
    uniform_placement,
)
from synthgen import SynthParams, format_provenance, generate

logger = logging.getLogger(__name__)


def setup_logging(config: Config, level: Optional[str] = None):
    """Log to stderr, and to the configured file if any."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if config.log_file:
        handlers.append(logging.FileHandler(config.log_file, encoding='utf-8'))
    logging.basicConfig(
        level=(level or config.log_level).upper(),
        format=config.log_format,
        handlers=handlers,
        force=True,
    )


@dataclass
class BreakEven:
    """How many optimized checkpoints match the savings of reference_k uniform ones."""

    method: str
    reference_k: int
    reference_saved: int
    baseline: int
    matching_k: Optional[int]
    k_max: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'method': self.method,
            'reference_k': self.reference_k,
            'reference_saved': self.reference_saved,
            'baseline': self.baseline,
            'matching_k': self.matching_k,
            'k_max': self.k_max,
        }


class CheckpointPlanner:
    """Main entry point that orchestrates all components."""

    def __init__(self, config: Union[Config, str, None] = None):
        self.config = config if isinstance(config, Config) else Config(config)

    def ga_config(self, **overrides) -> GaConfig:
        return GaConfig.from_config(self.config, **overrides)

    def place(self, d: FaultDistribution, method: Union[PlacementMethod, str], k: int, *,
              snap: Optional[bool] = None, budget: Optional[int] = None,
              ga_overrides: Optional[Dict[str, Any]] = None,
              trace_path: Optional[str] = None) -> PlacementResult:
        method = PlacementMethod(method)
        if method is PlacementMethod.UNIFORM:
            snap = self.config.get('placement.snap_uniform', False) if snap is None else snap
            return uniform_placement(d, k, snap=snap)
        if method is PlacementMethod.DP:
            return dp_placement(d, k)
        if method is PlacementMethod.EXHAUSTIVE:
            return exhaustive_placement(d, k, budget=budget or self.config.exhaustive_budget)
        cfg = self.ga_config(**(ga_overrides or {}))
        return genetic_placement(d, k, cfg, trace_path=trace_path)

    def evaluate(self, d: FaultDistribution, plan: CheckpointPlan) -> SavingsReport:
        plan.validate_against(d)
        return savings(d, plan)

    def score(self, d: FaultDistribution) -> NonUniformityScore:
        return wfft(d, bins=self.config.get('metrics.bins', 200),
                    tolerance=self.config.get('metrics.zero_tolerance', 1e-9))

    def export_ilp(self, d: FaultDistribution, k: int) -> str:
        return emit_lp(build_ilp(d, k))

    def import_solution(self, d: FaultDistribution, k: int, solution: str) -> PlacementResult:
        """Validate a solver's solution dump and report its plan like any other placement."""
        started = time.perf_counter()
        model = build_ilp(d, k)
        plan = parse_solution(model, solution, tolerance=self.config.get('ilp.integrality_tolerance', 1e-6))
        return finish_result(d, plan, 'ilp', started, k)

    def generate(self, **overrides) -> Tuple[FaultDistribution, List[str]]:
        params = SynthParams.from_config(self.config, **overrides)
        return generate(params), format_provenance(params)

    def simulate_cache(self, trace_path: str, no_cache: bool = False, **overrides) -> FaultDistribution:
        trace = read_trace(trace_path)
        cfg = CacheConfig.from_config(self.config, **overrides)
        if no_cache:
            return uncached_distribution(trace, cfg.filter, cfg.weight_per_miss)
        return simulate(trace, cfg)

    def load_sources(self, spec: ExperimentSpec) -> List[Tuple[str, FaultDistribution]]:
        """Materialize every distribution source of a spec as (dist_id, distribution)."""
        loaded: List[Tuple[str, FaultDistribution]] = []
        for source in spec.sources:
            if isinstance(source, FileSource):
                loaded.append((Path(source.path).stem, read_distribution(source.path)))
            elif isinstance(source, SynthSource):
                for seed in source.seeds:
                    d, _ = self.generate(**{**source.params, 'seed': seed})
                    loaded.append((f"synth-{seed}", d))
            elif isinstance(source, CacheSimSource):
                trace = read_trace(source.trace)
                base = CacheConfig.from_config(self.config, filter=TraceFilter(source.filter))
                stem = Path(source.trace).stem
                for size in source.sizes:
                    if size == 0:
                        d = uncached_distribution(trace, base.filter, base.weight_per_miss)
                        loaded.append((f"{stem}-nocache", d))
                    else:
                        loaded.append((f"{stem}-{size}", simulate(trace, replace(base, total_size=size))))

        seen: Dict[str, int] = {}
        unique = []
        for dist_id, d in loaded:
            seen[dist_id] = seen.get(dist_id, 0) + 1
            unique.append((dist_id if seen[dist_id] == 1 else f"{dist_id}#{seen[dist_id]}", d))
        return unique

    def compare(self, spec: ExperimentSpec) -> ExperimentReport:
        """Run every (distribution, method, k) cell of an experiment."""
        distributions = self.load_sources(spec)
        ga_overrides = {'seed': spec.seed, 'islands': spec.islands, 'max_generations': spec.max_generations}

        def placer(d: FaultDistribution, method: PlacementMethod, k: int) -> PlacementResult:
            return self.place(d, method, k, ga_overrides=ga_overrides)

        runner = ExperimentRunner(
            placer=placer,
            scorer=lambda d: self.score(d).value,
            max_workers=self.config.get('experiments.max_workers'),
        )
        omit_timing = spec.omit_timing or bool(self.config.get('experiments.omit_timing', False))
        return runner.run(distributions, spec.methods, spec.k_values, omit_timing=omit_timing)

    def break_even(self, d: FaultDistribution, reference_k: Optional[int] = None,
                   k_max: Optional[int] = None,
                   method: Union[PlacementMethod, str] = PlacementMethod.DP,
                   ga_overrides: Optional[Dict[str, Any]] = None) -> BreakEven:
        method = PlacementMethod(method)
        reference_k = reference_k if reference_k is not None else self.config.get('placement.break_even_reference_k', 16)
        k_max = k_max if k_max is not None else self.config.get('placement.break_even_k_max', 64)
        reference = uniform_placement(d, reference_k)

        if method is PlacementMethod.DP:
            matching = checkpoints_to_match(d, reference.saved, k_max)
        else:
            matching = checkpoints_to_match(d, reference.saved, k_max,
                                            placer=lambda dist, k: self.place(dist, method, k, ga_overrides=ga_overrides))
        logger.info(f"{reference_k} uniform checkpoints save {reference.saved}; "
                    f"{method.value} matches with {matching} checkpoints")
        return BreakEven(method=method.value, reference_k=reference_k, reference_saved=reference.saved,
                         baseline=reference.report.baseline, matching_k=matching, k_max=k_max)


def main():
    """Main entry point."""
    from cli import main as cli_main
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
