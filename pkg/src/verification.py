"""
Verification
Executable statistical and exact checks of the claims the optimizers rely on.

Unlike the optimizers, the checks here build their states with direct access
to the hidden instance (sigma and z). Every check is a pure function of its
arguments and seed and returns a CheckReport.

CHECKS:
    - improvement_probability: one encoded mutation of y' at level l+c
      improves it with probability (1-1/k)^c / k >= 1/(e*k)
    - level_sample_sizes: a batch of ceil(8e*log^1.5(n)/loglog(n)) samples
      puts at least 4*log(n)/loglog(n) samples on every level of a block
    - unique_identification: that many samples per level leave exactly
      sigma(l+c) as the candidate of level c
    - unbiasedness: exact XOR-shift and permutation invariance of the
      output distribution of every unbiased operator, for n <= 6
    - arity_audit: a recorded variation trace never exceeds the arity bound
"""

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from algorithms import block_length
from logger import get_logger
from oracle import BitString, Instance, evaluate, make_instance
from operators import (
    REGISTRY,
    VariationTrace,
    arity_mismatches,
    bits_from_int,
    exact_distribution,
    flip_disagreement_independently,
    int_from_bits,
)

logger = get_logger('lo_lab.verification')

SUCCESS_FREQUENCY = 0.9
MAX_EXACT_DIMENSION = 6
EXHAUSTIVE_TUPLE_DIMENSION = 3
EXHAUSTIVE_PERMUTATION_DIMENSION = 5


@dataclass
class CheckReport:
    """Outcome of one check; passed tells whether statistic met bound"""
    check_name: str
    statistic: float
    bound: float
    samples: int
    passed: bool
    detail: str = ''
    seed: Optional[int] = None
    metrics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def level_sample_budget(n: int) -> int:
    """ceil(8e * log2(n)^1.5 / log2(log2(n))); 348 for n = 2^16"""
    log_n = math.log2(n)
    return math.ceil(8 * math.e * log_n ** 1.5 / math.log2(log_n))


def level_size_threshold(n: int) -> float:
    """4 * log2(n) / log2(log2(n)); 16 for n = 2^16"""
    log_n = math.log2(n)
    return 4 * log_n / math.log2(log_n)


def _require_block_dimension(n: int):
    if n < 16:
        raise ValueError(f"Block checks need n >= 16, got {n}")


def build_block_state(instance: Instance, ell: int, level: int,
                      rng: np.random.Generator) -> Tuple[BitString, BitString, BitString]:
    """
    Construct an l-encoding pair (x, y) and y' of fitness exactly l+level.

    y is random apart from matching z on sigma(1..l) and missing it at
    sigma(l+1); x is the complement of y outside sigma(1..l); y' copies y
    and fixes sigma(l+1..l+level), missing z at sigma(l+level+1) if that exists.
    """
    n = instance.n
    if not 0 <= ell < n or not 0 <= level <= n - ell:
        raise ValueError(f"Need 0 <= ell < n and 0 <= level <= n - ell, got ell={ell}, level={level}, n={n}")
    order = instance.sigma.indices
    z = instance.z

    y = rng.integers(0, 2, size=n, dtype=np.uint8)
    y[order[:ell]] = z[order[:ell]]
    y[order[ell]] = 1 - z[order[ell]]

    x = y ^ 1
    x[order[:ell]] = z[order[:ell]]

    y_prime = y.copy()
    y_prime[order[ell:ell + level]] = z[order[ell:ell + level]]
    if ell + level < n:
        y_prime[order[ell + level]] = 1 - z[order[ell + level]]
    return x, y, y_prime


def check_improvement_probability(n: int, k: int, c: int, samples: int, seed: int = 0,
                                  ell: Optional[int] = None) -> CheckReport:
    """
    Frequency with which one encoded mutation improves y' at level l+c.

    Args:
        n: Dimension
        k: Block length; flip probability is 1/k
        c: Level offset of y' above l, 0 <= c < k
        samples: Number of mutations drawn
        seed: Random seed
        ell: Encoding length; defaults to (n - k) // 2

    Returns:
        Report passing iff the frequency is at least
        1/(e*k) - 3*sqrt(1/(e*k))/sqrt(samples)
    """
    if ell is None:
        ell = (n - k) // 2
    if k < 1 or not 0 <= c < k or k > n - ell or ell < 0:
        raise ValueError(f"Need 0 <= c < k <= n - ell, got c={c}, k={k}, n={n}, ell={ell}")
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")

    rng = np.random.default_rng(seed)
    instance = make_instance(n, rng)
    x, y, y_prime = build_block_state(instance, ell, c, rng)
    base_fitness = evaluate(instance, y_prime)
    p = Fraction(1, k)

    improvements = 0
    for _ in range(samples):
        child = flip_disagreement_independently(y_prime, x, y, p, rng)
        if evaluate(instance, child) > base_fitness:
            improvements += 1

    frequency = improvements / samples
    lower = 1 / (math.e * k)
    bound = lower - 3 * math.sqrt(lower) / math.sqrt(samples)
    closed_form = (1 - 1 / k) ** c / k
    standard_error = math.sqrt(closed_form * (1 - closed_form) / samples)
    z_score = (frequency - closed_form) / standard_error if standard_error > 0 else 0.0

    report = CheckReport(
        check_name='improvement_probability',
        statistic=frequency,
        bound=bound,
        samples=samples,
        passed=frequency >= bound,
        detail=f"n={n} k={k} c={c} ell={ell}: {improvements}/{samples} improving",
        seed=seed,
        metrics={
            'closed_form': closed_form,
            'lower_bound': lower,
            'standard_error': standard_error,
            'z_score': z_score,
            'within_three_standard_errors': abs(z_score) <= 3
        }
    )
    logger.info(f"[CHECK] {report.check_name}: {frequency:.5f} vs bound {bound:.5f} ({'pass' if report.passed else 'FAIL'})")
    return report


def _level_counts(instance: Instance, x: BitString, y: BitString, y_prime: BitString, ell: int, k: int,
                  draws: int, rng: np.random.Generator) -> List[int]:
    counts = [0] * k
    p = Fraction(1, k)
    for _ in range(draws):
        fitness = evaluate(instance, flip_disagreement_independently(y_prime, x, y, p, rng))
        if ell <= fitness < ell + k:
            counts[fitness - ell] += 1
    return counts


def check_level_sample_sizes(n: int, trials: int, seed: int = 0,
                             threshold: float = SUCCESS_FREQUENCY) -> CheckReport:
    """
    Per trial, draw level_sample_budget(n) mutations of a y' at level l+k and
    require every level l..l+k-1 to collect at least level_size_threshold(n)
    samples. Passes iff the trial success frequency reaches threshold.
    """
    _require_block_dimension(n)

    rng = np.random.default_rng(seed)
    k = block_length(n)
    ell = (n - k) // 2
    draws = level_sample_budget(n)
    needed = level_size_threshold(n)

    successes = 0
    minimum_counts = []
    level_totals = np.zeros(k)
    for _ in range(trials):
        instance = make_instance(n, rng)
        x, y, y_prime = build_block_state(instance, ell, k, rng)
        counts = _level_counts(instance, x, y, y_prime, ell, k, draws, rng)
        level_totals += counts
        minimum_counts.append(min(counts))
        if min(counts) >= needed:
            successes += 1

    frequency = successes / trials
    hit_rates = (level_totals / (trials * draws)).tolist()
    report = CheckReport(
        check_name='level_sample_sizes',
        statistic=frequency,
        bound=threshold,
        samples=trials,
        passed=frequency >= threshold,
        detail=f"n={n} k={k}: {draws} draws per trial, need {needed:.2f} per level",
        seed=seed,
        metrics={
            'draws_per_trial': draws,
            'level_size_threshold': needed,
            'mean_minimum_count': float(np.mean(minimum_counts)),
            'level_hit_rates': hit_rates,
            'level_hit_closed_forms': [(1 - 1 / k) ** c / k for c in range(k)],
            'hit_rate_lower_bound': 1 / (math.e * k)
        }
    )
    logger.info(f"[CHECK] {report.check_name}: {successes}/{trials} trials ({'pass' if report.passed else 'FAIL'})")
    return report


def _fill_levels(instance: Instance, x: BitString, y: BitString, y_prime: BitString, ell: int, k: int,
                 per_level: int, rng: np.random.Generator) -> Tuple[Dict[int, List[BitString]], int]:
    levels: Dict[int, List[BitString]] = {c: [] for c in range(1, k + 1)}
    p = Fraction(1, k)
    draws = 0
    while any(len(samples) < per_level for samples in levels.values()):
        w = flip_disagreement_independently(y_prime, x, y, p, rng)
        draws += 1
        fitness = evaluate(instance, w)
        if ell <= fitness < ell + k and len(levels[fitness - ell + 1]) < per_level:
            levels[fitness - ell + 1].append(w)
    return levels, draws


def check_unique_identification(n: int, trials: int, seed: int = 0,
                                threshold: float = SUCCESS_FREQUENCY) -> CheckReport:
    """
    Per trial, collect exactly ceil(level_size_threshold(n)) samples on every
    level by rejection sampling and compute each level's candidate set. The
    trial succeeds iff every candidate set is exactly {sigma(l+c)}.
    """
    _require_block_dimension(n)

    rng = np.random.default_rng(seed)
    k = block_length(n)
    ell = (n - k) // 2
    per_level = math.ceil(level_size_threshold(n))

    successes = 0
    wrong_singletons = 0
    lost_true_position = 0
    total_draws = 0
    for _ in range(trials):
        instance = make_instance(n, rng)
        x, y, y_prime = build_block_state(instance, ell, k, rng)
        levels, draws = _fill_levels(instance, x, y, y_prime, ell, k, per_level, rng)
        total_draws += draws

        non_encoding = x != y
        trial_ok = True
        for c, samples in levels.items():
            mask = non_encoding.copy()
            for w in samples:
                mask &= (w != y_prime)
            candidates = set(int(i) + 1 for i in np.flatnonzero(mask))
            truth = instance.sigma(ell + c)
            if truth not in candidates:
                lost_true_position += 1
            if candidates != {truth}:
                trial_ok = False
                if len(candidates) == 1:
                    wrong_singletons += 1
        successes += trial_ok

    frequency = successes / trials
    survival = (1 / math.sqrt(math.log2(n))) ** per_level
    report = CheckReport(
        check_name='unique_identification',
        statistic=frequency,
        bound=threshold,
        samples=trials,
        passed=frequency >= threshold and lost_true_position == 0,
        detail=f"n={n} k={k}: {per_level} samples per level, {total_draws} draws",
        seed=seed,
        metrics={
            'samples_per_level': per_level,
            'wrong_singletons': wrong_singletons,
            'lost_true_position': lost_true_position,
            'wrong_position_survival': survival,
            'inverse_square_dimension': 1 / n ** 2
        }
    )
    logger.info(f"[CHECK] {report.check_name}: {successes}/{trials} trials ({'pass' if report.passed else 'FAIL'})")
    return report


# Exact invariance

def _argument_tuples(n: int, arity: int, count: int, rng: np.random.Generator) -> Iterator[Tuple[int, ...]]:
    if n <= EXHAUSTIVE_TUPLE_DIMENSION:
        yield from itertools.product(range(2 ** n), repeat=arity)
        return
    for _ in range(count):
        yield tuple(int(v) for v in rng.integers(0, 2 ** n, size=arity))


def _permutations(n: int, count: int, rng: np.random.Generator) -> List[np.ndarray]:
    if n <= EXHAUSTIVE_PERMUTATION_DIMENSION:
        return [np.array(p) for p in itertools.permutations(range(n))]
    return [rng.permutation(n) for _ in range(count)]


def _permute(value: int, permutation: np.ndarray, n: int) -> int:
    return int_from_bits(bits_from_int(value, n)[permutation])


def invariance_violations(name: str, n: int, args: Sequence[int], permutations: Sequence[np.ndarray],
                          p: Optional[Fraction] = None, positions: Sequence[int] = ()) -> Tuple[int, int]:
    """
    Count (shift, permutation) violations of one operator on one argument tuple.

    Distributions are compared exactly as dictionaries of Fractions.
    """
    def distribution(values: Sequence[int]) -> Dict[int, Fraction]:
        return exact_distribution(name, tuple(bits_from_int(v, n) for v in values), p=p, positions=positions)

    reference = distribution(args)
    shift_violations = 0
    for shift in range(2 ** n):
        shifted = distribution([v ^ shift for v in args])
        if shifted != {out ^ shift: prob for out, prob in reference.items()}:
            shift_violations += 1

    permutation_violations = 0
    for permutation in permutations:
        permuted = distribution([_permute(v, permutation, n) for v in args])
        if permuted != {_permute(out, permutation, n): prob for out, prob in reference.items()}:
            permutation_violations += 1
    return shift_violations, permutation_violations


def check_unbiasedness(n: int, seed: int = 0, tuples: int = 50, permutations: int = 60,
                       probabilities: Sequence[Fraction] = (Fraction(1, 2), Fraction(1, 3))) -> CheckReport:
    """
    Exact XOR-shift and permutation invariance of every unbiased operator.

    All argument tuples are enumerated for n <= 3, otherwise `tuples` random
    ones; all permutations for n <= 5, otherwise `permutations` random ones;
    every shift always. The position-dependent flip_positions({1}) serves as
    a probe that the check must flag. Passes iff no unbiased operator
    violates invariance, the probe is flagged and every declared arity
    matches its signature.
    """
    if not 1 <= n <= MAX_EXACT_DIMENSION:
        raise ValueError(f"Exact invariance checks need 1 <= n <= {MAX_EXACT_DIMENSION}, got {n}")
    rng = np.random.default_rng(seed)
    perms = _permutations(n, permutations, rng)

    per_operator: Dict[str, Dict[str, Any]] = {}
    checked_tuples = 0
    for name, descriptor in REGISTRY.items():
        if descriptor.arity == 0 or not descriptor.unbiased:
            continue
        parameter_values = probabilities if 'p' in descriptor.parameters else (None,)
        shift_bad = perm_bad = count = 0
        for p in parameter_values:
            for args in _argument_tuples(n, descriptor.arity, tuples, rng):
                s_bad, p_bad = invariance_violations(name, n, args, perms, p=p)
                shift_bad += s_bad
                perm_bad += p_bad
                count += 1
        checked_tuples += count
        per_operator[name] = {'tuples': count, 'shift_violations': shift_bad, 'permutation_violations': perm_bad}

    probe_shift = probe_perm = 0
    for args in _argument_tuples(n, 1, tuples, rng):
        s_bad, p_bad = invariance_violations('flip_positions', n, args, perms, positions=(1,))
        probe_shift += s_bad
        probe_perm += p_bad
    probe_flagged = probe_shift + probe_perm > 0
    # a single position is trivially permutation invariant
    probe_ok = probe_flagged or n == 1

    biased = [name for name, result in per_operator.items()
              if result['shift_violations'] or result['permutation_violations']]
    mismatches = arity_mismatches()
    report = CheckReport(
        check_name='unbiasedness',
        statistic=float(len(biased)),
        bound=0.0,
        samples=checked_tuples,
        passed=not biased and probe_ok and not mismatches,
        detail=(f"n={n}: {len(per_operator)} operators, {len(perms)} permutations, {2 ** n} shifts; "
                f"probe flip_positions({{1}}) {'flagged' if probe_flagged else 'NOT flagged'}"),
        seed=seed,
        metrics={
            'operators': per_operator,
            'biased_operators': biased,
            'probe_shift_violations': probe_shift,
            'probe_permutation_violations': probe_perm,
            'arity_mismatches': mismatches
        }
    )
    logger.info(f"[CHECK] {report.check_name} n={n}: {'pass' if report.passed else 'FAIL'} {biased or ''}")
    return report


def audit_arity(trace: VariationTrace, max_arity: int = 3) -> CheckReport:
    """Fail on any recorded variation reading more than max_arity strings or using a biased operator"""
    too_wide = [event.operator for event in trace if event.arity > max_arity]
    biased = sorted({event.operator for event in trace if not event.unbiased})
    passed = not too_wide and not biased
    return CheckReport(
        check_name='arity_audit',
        statistic=float(trace.max_arity),
        bound=float(max_arity),
        samples=len(trace),
        passed=passed,
        detail=f"{len(trace)} events, max arity {trace.max_arity}" + (f", biased: {biased}" if biased else ''),
        metrics={'operator_counts': trace.counts(), 'too_wide': sorted(set(too_wide)), 'biased': biased}
    )


def chi_square_uniformity(counts: Sequence[int]) -> float:
    """p-value of a chi-square goodness-of-fit test against the uniform distribution"""
    return float(stats.chisquare(np.asarray(counts, dtype=float)).pvalue)


CHECKS = ('improvement', 'level-sizes', 'identification', 'unbiasedness')

# names used by the experiment protocol
CHECK_ALIASES = {'lemma2': 'improvement', 'lemma4': 'level-sizes', 'lemma5': 'identification'}


def resolve_check(name: str) -> str:
    """Map a ``--check`` value to its canonical check name"""
    return CHECK_ALIASES.get(name, name)
