"""
LeadingOnes Query Lab - command line harness

Subcommands:
    run      Run trials of one algorithm over a list of sizes and persist them
    verify   Run one of the statistical / exact checks
    scaling  Recompute a scaling summary from a persisted CSV
    config   Validate the configuration file and show reproducing commands

Exit status is 0 on success, 1 on any truncated trial, failed check or
unwritable output, and 2 on invalid configuration.
"""

import argparse
import json
import os
import shutil
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pytz

from algorithms import ALGORITHMS, block_length, query_budget
from config_manager import BASELINES, ConfigManager
from experiment_runner import ExperimentRunner
from logger import get_logger, setup_logging
from oracle import OracleMode, OracleSession, make_instance
from records_io import TrialRecord, emit_csv, read_csv, write_json, write_jsonl, append_jsonl
from scaling import ScalingSummary, doubling_ratios, format_summary_table, summarize
from trial_id_utils import create_trial_id, derive_trial_seed, trial_generators
import verification

logger = get_logger('lo_lab.harness')


def get_terminal_size() -> int:
    """Safely get terminal width with a fallback."""
    try:
        return shutil.get_terminal_size().columns
    except (OSError, ValueError):
        return 80  # Fallback in case terminal size can't be determined


def get_timezone():
    """Timezone from the TZ environment variable, default UTC"""
    tz_name = os.environ.get('TZ', 'UTC')
    try:
        return pytz.timezone(tz_name)
    except pytz.UnknownTimeZoneError:
        logger.warning(f"[CONFIG] Unknown timezone '{tz_name}', falling back to UTC")
        return pytz.UTC


def now_iso() -> str:
    return datetime.now(get_timezone()).isoformat(timespec='seconds')


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, immutable description of one experiment; mode follows the algorithm"""
    algorithm: str
    sizes: Tuple[int, ...]
    trials_per_size: int
    base_seed: int
    budget_factor: float = 50
    workers: int = 1
    mode: OracleMode = field(default=OracleMode.VALUE)

    def __post_init__(self):
        object.__setattr__(self, 'sizes', tuple(self.sizes))
        forced = OracleMode.RANKING if self.algorithm == 'ranking' else OracleMode.VALUE
        object.__setattr__(self, 'mode', forced)

    def validate(self) -> List[str]:
        """Collect every problem; empty when the config is usable"""
        errors = []
        if self.algorithm not in ALGORITHMS:
            errors.append(f"Unknown algorithm '{self.algorithm}', expected one of {', '.join(ALGORITHMS)}")
        if not self.sizes:
            errors.append("At least one size is required")
        bad_sizes = [n for n in self.sizes if not isinstance(n, int) or n < 1]
        if bad_sizes:
            errors.append(f"Sizes must be positive integers, got {bad_sizes}")
        if self.trials_per_size < 1:
            errors.append(f"trials_per_size must be at least 1, got {self.trials_per_size}")
        if not 0 <= self.base_seed < 2 ** 64:
            errors.append(f"base_seed must be an unsigned 64-bit integer, got {self.base_seed}")
        if not self.budget_factor > 0:
            errors.append(f"budget_factor must be positive, got {self.budget_factor}")
        if self.workers < 1:
            errors.append(f"workers must be at least 1, got {self.workers}")
        return errors

    def to_cli_args(self) -> List[str]:
        """Arguments of a `run` command reproducing this experiment"""
        args = ['run', '--algorithm', self.algorithm,
                '--sizes', ','.join(str(n) for n in self.sizes),
                '--trials', str(self.trials_per_size),
                '--seed', str(self.base_seed),
                '--budget-factor', f"{self.budget_factor:g}"]
        if self.mode is OracleMode.RANKING:
            args.extend(['--mode', 'ranking'])
        if self.workers > 1:
            args.extend(['--workers', str(self.workers)])
        return args

    def to_dict(self) -> Dict[str, Any]:
        return {
            'algorithm': self.algorithm,
            'sizes': list(self.sizes),
            'trials_per_size': self.trials_per_size,
            'base_seed': self.base_seed,
            'mode': self.mode.value,
            'budget_factor': self.budget_factor,
            'workers': self.workers
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: List[TrialRecord]
    summary: Optional[ScalingSummary]
    interrupted: bool = False
    error: Optional[str] = None

    @property
    def truncations(self) -> int:
        return sum(r.truncated for r in self.records)


def run_trial(config: ExperimentConfig, n: int, trial_index: int) -> TrialRecord:
    """
    Run one trial on a fresh instance.

    The instance and the algorithm draw from two independent streams spawned
    from the trial seed, so a trial is a pure function of (config, n, trial_index).
    """
    seed = derive_trial_seed(config.base_seed, config.algorithm, n, trial_index)
    instance_rng, algorithm_rng = trial_generators(seed)
    session = OracleSession(make_instance(n, instance_rng), config.mode)
    budget = query_budget(config.algorithm, n, config.budget_factor)

    start = time.perf_counter()
    result = ALGORITHMS[config.algorithm](session, algorithm_rng, budget=budget)
    wall_time_ms = round((time.perf_counter() - start) * 1000, 3)

    if result.success and session.query_count != result.queries:
        raise RuntimeError(
            f"Query accounting broken for {create_trial_id(config.algorithm, n, trial_index)}: "
            f"session counted {session.query_count}, result reports {result.queries}"
        )
    logger.debug(f"[TRIAL] {create_trial_id(config.algorithm, n, trial_index)}: {result.queries} queries")
    return TrialRecord(
        algorithm=config.algorithm,
        n=n,
        trial_index=trial_index,
        seed=seed,
        queries=result.queries,
        truncated=not result.success,
        wall_time_ms=wall_time_ms
    )


def run_experiment(
    config: ExperimentConfig,
    progress_callback: Optional[Callable[[Dict[str, Any]], None]] = None,
    min_spread_trials: int = 30
) -> ExperimentResult:
    """Run every (n, trial_index) of the config and aggregate the records"""
    runner = ExperimentRunner(
        partial(run_trial, config),
        config.sizes,
        config.trials_per_size,
        workers=config.workers,
        progress_callback=progress_callback,
        output_callback=print
    )
    outcome = runner.run()
    records = outcome['results']
    summary = summarize(records, min_spread_trials) if records else None
    return ExperimentResult(
        config=config,
        records=records,
        summary=summary,
        interrupted=outcome.get('interrupted', False),
        error=outcome.get('error')
    )


def write_outputs(result: ExperimentResult, out: Path, started_at: str) -> Dict[str, Path]:
    """CSV of the records, summary JSON lines and a manifest next to it"""
    paths = {'csv': emit_csv(result.records, out)}
    if result.summary:
        paths['summary'] = out.with_suffix('.summary.jsonl')
        write_jsonl(paths['summary'], result.summary.to_json_lines())
    paths['manifest'] = write_json(out.with_suffix('.manifest.json'), {
        'config': result.config.to_dict(),
        'command': ['python', 'src/harness.py'] + result.config.to_cli_args(),
        'started_at': started_at,
        'finished_at': now_iso(),
        'totals': {
            'trials': len(result.records),
            'truncated': result.truncations,
            'interrupted': result.interrupted
        }
    })
    return paths


def print_config_table(params: Dict[str, Any]):
    terminal_width = get_terminal_size()
    print("=" * terminal_width)
    print("Experiment Configuration:")
    print("=" * terminal_width)
    for param, value in params.items():
        print(f"  {param:<20}: {value}")
    print("-" * terminal_width)


def print_summary(summary: ScalingSummary, interrupted: bool = False):
    print("\n" + "=" * 60 + "\nEXPERIMENT SUMMARY\n" + "=" * 60)
    if interrupted:
        print("🚨 Run was interrupted by user. Summary covers completed trials only. 🚨\n")
    for line in format_summary_table(summary):
        print(line)
    ratios = doubling_ratios(summary)
    if ratios:
        print("\nDoubling ratios T(2n)/T(n):")
        for n, ratio in ratios.items():
            print(f"  {n:>7} -> {2 * n:<7}: {ratio:.3f}")


def parse_sizes(text: str) -> List[int]:
    """Comma-separated positive integers; powers may be written as 2^k"""
    sizes = []
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        try:
            if '^' in item:
                base, exponent = item.split('^', 1)
                value = int(base) ** int(exponent)
            else:
                value = int(item)
        except ValueError:
            raise argparse.ArgumentTypeError(f"Invalid size '{item}'. Use integers such as 1024 or 2^10.")
        if value < 1:
            raise argparse.ArgumentTypeError(f"Sizes must be positive, got {value}")
        sizes.append(value)
    if not sizes:
        raise argparse.ArgumentTypeError("No sizes provided.")
    return sizes


def parse_assignment(text: str) -> Tuple[str, Any]:
    """KEY=VALUE with a JSON value; bare words are kept as strings"""
    key, sep, raw = text.partition('=')
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"Expected KEY=VALUE, got '{text}'")
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return key.strip(), value


def cmd_run(args, config_manager: ConfigManager) -> int:
    algorithm = args.algorithm
    requested_mode = args.mode
    config = ExperimentConfig(
        algorithm=algorithm,
        sizes=args.sizes or config_manager.sizes_for(algorithm),
        trials_per_size=args.trials if args.trials is not None else config_manager.trials_for(algorithm),
        base_seed=args.seed if args.seed is not None else config_manager.get('base_seed'),
        budget_factor=args.budget_factor if args.budget_factor is not None else config_manager.get('budget_factor'),
        workers=args.workers if args.workers is not None else config_manager.get('workers')
    )
    if requested_mode and requested_mode != config.mode.value:
        logger.warning(f"[CONFIG] --mode {requested_mode} ignored: {algorithm} runs in {config.mode.value} mode")

    errors = config.validate()
    if errors:
        for error in errors:
            print(f"Configuration error: {error}", file=sys.stderr)
        return 2

    print_config_table({
        'Algorithm': config.algorithm,
        'Sizes': ', '.join(str(n) for n in config.sizes),
        'Trials per size': config.trials_per_size,
        'Base seed': config.base_seed,
        'Mode': config.mode.value,
        'Budget factor': f"{config.budget_factor:g}",
        'Workers': config.workers,
        'Output': args.out
    })

    started_at = now_iso()
    result = run_experiment(config, min_spread_trials=config_manager.verification('spread_min_trials'))

    try:
        write_outputs(result, Path(args.out), started_at)
    except OSError as e:
        print(f"Cannot write results: {e}", file=sys.stderr)
        return 1

    if result.summary:
        print_summary(result.summary, interrupted=result.interrupted)
    if result.error or result.interrupted:
        return 1
    if result.truncations:
        print(f"\n{result.truncations} trial(s) truncated by the query budget.")
        return 1
    print("\nExperiment completed successfully!")
    return 0


def _reports_for(args, config_manager: ConfigManager) -> List[verification.CheckReport]:
    check = verification.resolve_check(args.check)
    frequency = config_manager.verification('success_frequency')
    seed = args.seed if args.seed is not None else config_manager.get('base_seed')

    if check == 'improvement':
        n = args.n or 256
        k = args.k or block_length(n)
        samples = args.samples or config_manager.verification('improvement_samples')
        c_values = [args.c] if args.c is not None else list(range(k))
        return [verification.check_improvement_probability(n, k, c, samples, seed=seed) for c in c_values]
    if check == 'level-sizes':
        n = args.n or config_manager.verification('identification_n')
        trials = args.trials or config_manager.verification('identification_trials')
        return [verification.check_level_sample_sizes(n, trials, seed=seed, threshold=frequency)]
    if check == 'identification':
        n = args.n or config_manager.verification('identification_n')
        trials = args.trials or config_manager.verification('identification_trials')
        return [verification.check_unique_identification(n, trials, seed=seed, threshold=frequency)]
    dimensions = [args.n] if args.n else range(1, verification.MAX_EXACT_DIMENSION + 1)
    return [verification.check_unbiasedness(n, seed=seed) for n in dimensions]


def cmd_verify(args, config_manager: ConfigManager) -> int:
    try:
        reports = _reports_for(args, config_manager)
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 2

    for report in reports:
        print(report.to_json())
    if args.out:
        try:
            append_jsonl(args.out, [report.to_dict() for report in reports])
        except OSError as e:
            print(f"Cannot write reports: {e}", file=sys.stderr)
            return 1
    return 0 if all(report.passed for report in reports) else 1


def cmd_scaling(args, config_manager: ConfigManager) -> int:
    try:
        records = read_csv(args.input)
    except (OSError, ValueError, KeyError) as e:
        print(f"Cannot read {args.input}: {e}", file=sys.stderr)
        return 2
    if not records:
        print(f"No records in {args.input}", file=sys.stderr)
        return 2

    min_trials = args.min_trials or config_manager.verification('spread_min_trials')
    exit_code = 0
    for algorithm in sorted({r.algorithm for r in records}):
        summary = summarize([r for r in records if r.algorithm == algorithm], min_trials)
        print_summary(summary)
        if args.out:
            try:
                write_jsonl(args.out, summary.to_json_lines(), append=True)
            except OSError as e:
                print(f"Cannot write summary: {e}", file=sys.stderr)
                return 1
        if summary.truncations:
            exit_code = 1
    return exit_code


def cmd_config(args, config_manager: ConfigManager) -> int:
    if args.reset:
        if not config_manager.reset():
            return 1
        print(f"Reset {config_manager.config_path} to defaults")

    if args.set:
        try:
            updates = config_manager.merged_updates(dict(args.set))
        except ValueError as e:
            print(f"Configuration error: {e}", file=sys.stderr)
            return 2
        errors = config_manager.validate({**config_manager.get_all(), **updates})
        if errors:
            for error in errors:
                print(f"Configuration error: {error}", file=sys.stderr)
            return 2
        if not config_manager.update(updates):
            return 1
        print(f"Saved {', '.join(sorted(updates))} to {config_manager.config_path}")

    errors = config_manager.validate()
    if errors:
        for error in errors:
            print(f"Configuration error: {error}", file=sys.stderr)
        return 2
    if args.show:
        print(json.dumps(config_manager.get_all(), indent=2))
        return 0
    algorithms = [args.algorithm] if args.algorithm else list(ALGORITHMS)
    for algorithm in algorithms:
        print(' '.join(['python', 'src/harness.py'] + config_manager.to_cli_args(algorithm)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Query-complexity lab for hidden-permutation LeadingOnes.',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
Examples:
  python src/harness.py run --algorithm three_ary --sizes 2^10,2^12 --trials 200 --out results/three_ary.csv
  python src/harness.py verify --check improvement --n 256 --k 4 --c 3 --samples 100000
  python src/harness.py scaling --in results/three_ary.csv
  python src/harness.py config --set workers=4 --set verification.success_frequency=0.95
''')
    parser.add_argument('--config', default='data/config/lab_config.json', help='Configuration file (default: data/config/lab_config.json)')
    parser.add_argument('--log-level', default=None, help='Log level; overrides the LOG_LEVEL environment variable.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', help='Run trials and persist records.')
    run.add_argument('--algorithm', required=True, choices=list(ALGORITHMS))
    run.add_argument('--sizes', type=parse_sizes, help='Comma-separated sizes, e.g. "1024,4096" or "2^10,2^12". (Default: from config)')
    run.add_argument('--trials', type=int, help=f'Trials per size. (Default: from config, more for {" and ".join(BASELINES)})')
    run.add_argument('--seed', type=int, help='Base seed. (Default: from config)')
    run.add_argument('--out', required=True, help='CSV output path; summary and manifest are written next to it.')
    run.add_argument('--mode', choices=[m.value for m in OracleMode], help='Oracle mode; the ranking algorithm always uses ranking.')
    run.add_argument('--budget-factor', type=float, help='Query budget factor per run. (Default: 50)')
    run.add_argument('--workers', type=int, help='Parallel trial workers. (Default: 1)')

    verify = subparsers.add_parser('verify', help='Run a statistical or exact check.')
    verify.add_argument('--check', required=True, choices=list(verification.CHECKS) + list(verification.CHECK_ALIASES))
    verify.add_argument('--n', type=int, help='Dimension. (Default: per check)')
    verify.add_argument('--seed', type=int, help='Seed. (Default: base seed from config)')
    verify.add_argument('--trials', type=int, help='Trials for the identification checks.')
    verify.add_argument('--samples', type=int, help='Samples for the improvement check.')
    verify.add_argument('--k', type=int, help='Block length for the improvement check. (Default: ceil(sqrt(log2 n)))')
    verify.add_argument('--c', type=int, help='Level offset for the improvement check. (Default: every c < k)')
    verify.add_argument('--out', help='Append reports as JSON lines to this file.')

    scaling = subparsers.add_parser('scaling', help='Summarize a persisted CSV.')
    scaling.add_argument('--in', dest='input', required=True, help='CSV written by run.')
    scaling.add_argument('--out', help='Append summary JSON lines to this file.')
    scaling.add_argument('--min-trials', type=int, help='Minimum trials for a size to enter the spreads. (Default: 30)')

    config = subparsers.add_parser('config', help='Edit or validate the config file and print reproducing commands.')
    config.add_argument('--algorithm', choices=list(ALGORITHMS))
    config.add_argument('--set', action='append', type=parse_assignment, metavar='KEY=VALUE',
                        help='Save a value, e.g. workers=4 or verification.success_frequency=0.95. Repeatable.')
    config.add_argument('--reset', action='store_true', help='Restore the defaults before applying --set.')
    config.add_argument('--show', action='store_true', help='Print the merged configuration as JSON.')

    return parser


COMMANDS = {
    'run': cmd_run,
    'verify': cmd_verify,
    'scaling': cmd_scaling,
    'config': cmd_config,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        setup_logging(args.log_level)

    config_manager = ConfigManager(args.config)
    try:
        return COMMANDS[args.command](args, config_manager)
    except KeyboardInterrupt:
        print("\n\nInterrupted by user.")
        return 1


if __name__ == "__main__":
    sys.exit(main())
