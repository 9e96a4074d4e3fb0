"""
Command-line front end for checkpoint planning.

Exit codes: 0 success, 2 usage or validation error, 3 budget refusal,
4 internal invariant violation.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from config import Config
from distribution_core import CheckpointPlan, InvariantViolation
from distribution_io import parse_plan, read_distribution, report_to_csv, write_distribution
from experiment_runner import (
    CacheSimSource,
    ExperimentFailedError,
    ExperimentSpec,
    FileSource,
    SynthSource,
)
from main import CheckpointPlanner, setup_logging
from placement import BudgetExceededError, PlacementMethod

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_INTERNAL = 4

GA_FLAGS = {
    'base_population': int,
    'expanded_population': int,
    'elite': int,
    'survivor_exchange_p': float,
    'crossover_p': float,
    'per_mutation_p': float,
    'time_budget': float,
    'max_generations': int,
    'stall_generations': int,
    'islands': int,
}


def parse_seeds(text: str) -> List[int]:
    """Seeds from ``0-35`` ranges and comma separated values."""
    seeds = []
    for part in (p.strip() for p in text.split(',')):
        if not part:
            continue
        if '-' in part:
            low, high = part.split('-', 1)
            seeds.extend(range(int(low), int(high) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError(f"no seeds in {text!r}")
    return seeds


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument('--seed', type=int, default=None, help='RNG seed (generator and genetic search)')
    common.add_argument('--out', metavar='<file>', default=None, help='write output to a file instead of stdout')
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument('--json', dest='format', action='store_const', const='json', help='JSON output')
    fmt.add_argument('--csv', dest='format', action='store_const', const='csv', help='CSV output')
    common.add_argument('--config', metavar='<file>', default=None, help='JSON configuration file')
    common.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], default=None,
                        help='logging level (logs go to stderr)')
    return common


def _add_ga_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group('genetic search')
    for name, kind in GA_FLAGS.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None,
                           help=f"override genetic.{name}")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog='ckptplan',
        description='Checkpoint placement for fault-injection campaigns.',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest='command', required=True, metavar='<command>')

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text, allow_abbrev=False)

    gen = add('gen', 'generate a synthetic fault distribution')
    gen.add_argument('--steps', type=int, default=None, help='number of cycles')
    gen.add_argument('--carpet-height', type=int, default=None, help='uniform noise floor per cycle')
    gen.add_argument('--peak-count-mu', type=float, default=None, help='log-normal mu of the peak count')
    gen.add_argument('--peak-count-sigma', type=float, default=None, help='log-normal sigma of the peak count')
    gen.add_argument('--peak-count-range', type=int, nargs=2, metavar=('LO', 'HI'), default=None,
                     help='clamp range of the peak count')
    gen.add_argument('--height-factor-range', type=float, nargs=2, metavar=('LO', 'HI'), default=None,
                     help='peak height as a multiple of the carpet')
    gen.add_argument('--width-fraction-range', type=float, nargs=2, metavar=('LO', 'HI'), default=None,
                     help='peak width as a fraction of the span')

    place = add('place', 'place checkpoints on a distribution')
    place.add_argument('dist', help='distribution file')
    place.add_argument('--method', choices=[m.value for m in PlacementMethod], default='dp')
    place.add_argument('-k', type=int, required=True, help='number of checkpoints')
    place.add_argument('--snap', action='store_true', help='snap uniform checkpoints to candidate steps')
    place.add_argument('--budget', type=int, default=None, help='exhaustive enumeration budget')
    place.add_argument('--trace-fitness', metavar='<file>', default=None,
                       help='append generation,best,median rows of the genetic search')
    _add_ga_flags(place)

    evaluate = add('eval', 'savings of a given checkpoint plan')
    evaluate.add_argument('dist', help='distribution file')
    evaluate.add_argument('--plan', required=True, help='checkpoint times, comma separated')

    score = add('wfft', 'non-uniformity score of a distribution')
    score.add_argument('dist', help='distribution file')

    export = add('export-ilp', 'write the checkpoint selection ILP in CPLEX-LP format')
    export.add_argument('dist', help='distribution file')
    export.add_argument('-k', type=int, required=True, help='number of checkpoints')

    imp = add('import-sol', 'read a solver solution back into a checkpoint plan')
    imp.add_argument('dist', help='distribution file')
    imp.add_argument('solution', help="solution dump with '<name> <value>' lines")
    imp.add_argument('-k', type=int, required=True, help='number of checkpoints the model was built for')

    cache = add('cachesim', 'derive a distribution from cache misses in a memory trace')
    cache.add_argument('trace', help="trace file with '<I|R|W> <hex-address> <size>' lines")
    cache.add_argument('--size', dest='total_size', type=int, default=None, help='cache size in bytes')
    cache.add_argument('--associativity', type=int, default=None, help='ways per set')
    cache.add_argument('--line-size', type=int, default=None, help='line size in bytes')
    cache.add_argument('--weight-per-miss', type=int, default=None, help='planned injections per miss')
    cache.add_argument('--filter', choices=['instruction', 'data'], default=None, help='access kinds to simulate')
    cache.add_argument('--no-cache', action='store_true', help='every filtered access is an injection point')

    compare = add('compare', 'compare methods over distributions and checkpoint counts')
    compare.add_argument('--spec', metavar='<file>', default=None, help='JSON experiment spec')
    compare.add_argument('--dist', action='append', default=[], help='distribution file (repeatable)')
    compare.add_argument('--synth-seeds', type=parse_seeds, default=None, help="synthetic seeds, e.g. '0-35'")
    compare.add_argument('--trace', action='append', default=[], help='trace file (repeatable)')
    compare.add_argument('--cache-sizes', type=parse_seeds, default=None,
                         help="cache sizes for --trace, 0 for no cache, e.g. '0,2048,8192'")
    compare.add_argument('--methods', default=None, help="comma separated, e.g. 'uniform,dp'")
    compare.add_argument('-k', dest='k_values', type=int, action='append', default=None, help='repeatable')
    compare.add_argument('--max-generations', type=int, default=None, help='genetic generation cap')
    compare.add_argument('--islands', type=int, default=None, help='genetic islands per cell')
    compare.add_argument('--omit-timing', action='store_true', help='leave elapsed_ms empty')

    even = add('break-even', 'optimized checkpoints needed to match uniform savings')
    even.add_argument('dist', help='distribution file')
    even.add_argument('--reference-k', type=int, default=None, help='uniform checkpoint count')
    even.add_argument('--k-max', type=int, default=None, help='largest k to try')
    even.add_argument('--method', choices=['dp', 'genetic'], default='dp')
    _add_ga_flags(even)

    return parser


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _json(payload: Any) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _ga_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {name: getattr(args, name, None) for name in GA_FLAGS}
    overrides['seed'] = args.seed
    return {k: v for k, v in overrides.items() if v is not None}


def cmd_gen(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    overrides = {
        'steps': args.steps,
        'carpet_height': args.carpet_height,
        'peak_count_mu': args.peak_count_mu,
        'peak_count_sigma': args.peak_count_sigma,
        'peak_count_range': args.peak_count_range,
        'height_factor_range': args.height_factor_range,
        'width_fraction_range': args.width_fraction_range,
        'seed': args.seed,
    }
    d, provenance = planner.generate(**overrides)
    write_distribution(d, args.out or sys.stdout, extra_header=provenance)
    return EXIT_OK


def cmd_place(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    d = read_distribution(args.dist)
    result = planner.place(d, args.method, args.k, snap=args.snap or None, budget=args.budget,
                           ga_overrides=_ga_overrides(args), trace_path=args.trace_fitness)
    if args.format == 'csv':
        _emit(report_to_csv(result.report), args.out)
    else:
        _emit(_json(result.to_dict()), args.out)
    return EXIT_OK


def cmd_eval(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    d = read_distribution(args.dist)
    plan = CheckpointPlan.from_times(parse_plan(args.plan))
    report = planner.evaluate(d, plan)
    if args.format == 'csv':
        _emit(report_to_csv(report), args.out)
    else:
        _emit(_json({'plan': list(plan.times), **report.to_dict()}), args.out)
    return EXIT_OK


def cmd_wfft(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    score = planner.score(read_distribution(args.dist))
    if args.format == 'csv':
        _emit(score.to_csv(), args.out)
    else:
        _emit(_json({'wfft': score.value}), args.out)
    return EXIT_OK


def cmd_export_ilp(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    _emit(planner.export_ilp(read_distribution(args.dist), args.k), args.out)
    return EXIT_OK


def cmd_import_sol(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    d = read_distribution(args.dist)
    with open(args.solution, 'r', encoding='utf-8') as f:
        result = planner.import_solution(d, args.k, f.read())
    if args.format == 'csv':
        _emit(report_to_csv(result.report), args.out)
    else:
        _emit(_json(result.to_dict()), args.out)
    return EXIT_OK


def cmd_cachesim(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    overrides = {
        'total_size': args.total_size,
        'associativity': args.associativity,
        'line_size': args.line_size,
        'weight_per_miss': args.weight_per_miss,
        'filter': args.filter,
    }
    d = planner.simulate_cache(args.trace, no_cache=args.no_cache, **overrides)
    applied = ' '.join(f"{k}={v}" for k, v in overrides.items() if v is not None)
    header = [f"cachesim trace={args.trace} no_cache={args.no_cache} {applied}".rstrip()]
    write_distribution(d, args.out or sys.stdout, extra_header=header)
    return EXIT_OK


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    if args.spec:
        spec = ExperimentSpec.from_file(args.spec)
        updates = {}
        if args.omit_timing:
            updates['omit_timing'] = True
        if args.seed is not None:
            updates['seed'] = args.seed
        if args.max_generations is not None:
            updates['max_generations'] = args.max_generations
        if args.islands is not None:
            updates['islands'] = args.islands
        return spec.model_copy(update=updates) if updates else spec

    sources: List[Any] = [FileSource(path=path) for path in args.dist]
    if args.synth_seeds:
        sources.append(SynthSource(seeds=args.synth_seeds))
    for trace in args.trace:
        sources.append(CacheSimSource(trace=trace, sizes=args.cache_sizes or [8192]))
    if not sources:
        raise ValueError("compare needs --spec, --dist, --synth-seeds or --trace")
    if not args.methods:
        raise ValueError("--methods must name at least one method")
    return ExperimentSpec(
        sources=sources,
        methods=[m.strip() for m in args.methods.split(',') if m.strip()],
        k_values=args.k_values or [],
        seed=args.seed or 0,
        max_generations=args.max_generations,
        islands=args.islands or 1,
        omit_timing=args.omit_timing,
    )


def cmd_compare(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    code = EXIT_OK
    try:
        report = planner.compare(spec)
    except ExperimentFailedError as e:
        report = e.report
        code = _exit_code(e.cause) if e.cause is not None else EXIT_INTERNAL
        logger.error(str(e))
        if code == EXIT_OK:
            code = EXIT_INTERNAL

    if report is not None:
        csv_text = report.to_csv()
        json_text = _json(report.to_records())
        if spec.output_csv:
            _emit(csv_text, spec.output_csv)
        if spec.output_json:
            _emit(json_text, spec.output_json)
        _emit(json_text if args.format == 'json' else csv_text, args.out)
    return code


def cmd_break_even(planner: CheckpointPlanner, args: argparse.Namespace) -> int:
    d = read_distribution(args.dist)
    result = planner.break_even(d, args.reference_k, args.k_max, method=args.method,
                                ga_overrides=_ga_overrides(args))
    _emit(_json(result.to_dict()), args.out)
    return EXIT_OK


COMMANDS = {
    'gen': cmd_gen,
    'place': cmd_place,
    'eval': cmd_eval,
    'wfft': cmd_wfft,
    'export-ilp': cmd_export_ilp,
    'import-sol': cmd_import_sol,
    'cachesim': cmd_cachesim,
    'compare': cmd_compare,
    'break-even': cmd_break_even,
}


def _exit_code(error: BaseException) -> int:
    if isinstance(error, BudgetExceededError):
        return EXIT_BUDGET
    if isinstance(error, InvariantViolation):
        return EXIT_INTERNAL
    if isinstance(error, (ValueError, FileNotFoundError)):
        return EXIT_USAGE
    return EXIT_INTERNAL


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    config = Config(args.config or "config.json")
    setup_logging(config, args.log_level)
    planner = CheckpointPlanner(config)

    try:
        return COMMANDS[args.command](planner, args)
    except Exception as e:
        code = _exit_code(e)
        if code == EXIT_INTERNAL:
            logger.exception(f"Internal error in '{args.command}': {e}")
        else:
            logger.error(f"{args.command}: {e}")
        return code


if __name__ == "__main__":
    sys.exit(main())
