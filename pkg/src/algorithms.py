"""
Optimizers
Black-box optimizers for the hidden-permutation LeadingOnes class.

Every optimizer drives one OracleSession and only sees query answers.
A run ends the moment the optimum is queried for the first time, or when
the per-run query budget is used up (reported as success=False).

ALGORITHMS:
    - opo_ea: (1+1) EA with standard bit mutation, the quadratic baseline
    - binary_search: learns sigma(l+1) by halving the candidate set
    - star_ary: block learning with stored sample sets (unrestricted model)
    - three_ary: block learning with tracker strings (3-ary unbiased model)
    - ranking: three_ary driven by rank answers only

ENCODING PAIR:
    (x, y) with f(x) >= f(y) = l that agree exactly on sigma(1..l). Bits in
    the agreement set are never touched again; only the disagreement
    positions are varied.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from logger import get_logger
from oracle import BitString, OracleError, OracleMode, OracleSession
from operators import (
    agreement_mask,
    complement,
    eliminate_agreeing,
    flip_disagreement_independently,
    flip_positions,
    flip_where_equal,
    identity,
    standard_bit_mutation,
    uniform_sample,
)

logger = get_logger('lo_lab.algorithms')

MIN_BLOCK_DIMENSION = 16


class QueryBudgetExhausted(Exception):
    """The run hit its query budget before the optimum was queried"""


class OptimumQueried(Exception):
    """The optimum has just been queried; the run is over"""


@dataclass
class RunResult:
    """Outcome of one optimizer run"""
    queries: int
    success: bool

    @property
    def truncated(self) -> bool:
        return not self.success


def block_length(n: int) -> int:
    """k = ceil(sqrt(log2 n))"""
    if n < 1:
        raise ValueError(f"Dimension must be at least 1, got {n}")
    return math.ceil(math.sqrt(math.log2(n)))


def query_budget(algorithm: str, n: int, budget_factor: float = 50) -> int:
    """
    Safety budget for one run: ceil(budget_factor * g(n)).

    g(n) is n^2 for the (1+1) EA baseline and n*log2(n) (at least 1) for
    everything else.
    """
    if algorithm == 'opo_ea':
        scale = float(n * n)
    else:
        scale = max(1.0, n * math.log2(n))
    return math.ceil(budget_factor * scale)


class RunObserver:
    """
    Hooks called by the optimizers at bookkeeping milestones.

    The optimizers never look at the hidden instance; observers used in
    tests may, to check invariants from the outside.
    """

    def on_pair(self, pair: 'EncodingPair'):
        pass

    def on_candidates(self, ell: int, candidates: Dict[int, FrozenSet[int]]):
        pass

    def on_block(self, ell_before: int, ell_after: int, queries: int):
        pass

    def on_tracker_reset(self, ell: int, queries: int):
        pass

    def on_fold_rejected(self, ell: int, c: int):
        pass


class BlackBoxRun:
    """Query gate of one optimizer run: counts against the budget and stops at the optimum"""

    def __init__(self, session: OracleSession, budget: Optional[int] = None, stop_at_optimum: bool = True):
        self.session = session
        self.budget = budget
        self.stop_at_optimum = stop_at_optimum

    @property
    def n(self) -> int:
        return self.session.n

    @property
    def queries(self) -> int:
        return self.session.query_count

    def ask(self, x: BitString) -> int:
        if self.budget is not None and self.session.query_count >= self.budget:
            raise QueryBudgetExhausted()
        answer = self.session.query(x)
        if self.stop_at_optimum and self.session.optimum_query_index is not None:
            raise OptimumQueried()
        return answer

    def result(self, success: bool) -> RunResult:
        if success:
            return RunResult(queries=self.session.optimum_query_index, success=True)
        return RunResult(queries=self.session.query_count, success=False)


def _run_to_result(run: BlackBoxRun, body: Callable[[], None], name: str) -> RunResult:
    try:
        body()
    except OptimumQueried:
        return run.result(success=True)
    except QueryBudgetExhausted:
        logger.warning(f"[TRIAL] {name} truncated at {run.queries} queries (n={run.n})")
        return run.result(success=False)
    # Bodies only return normally once the optimum has been queried
    return run.result(success=run.session.solved)


@dataclass
class EncodingPair:
    """
    An l-encoding pair (x, y).

    fx and fy hold the last fitness values seen for x and y; they stay None
    when the session only answers ranks.
    """
    x: BitString
    y: BitString
    ell: int
    fx: Optional[int] = None
    fy: Optional[int] = None

    @property
    def encoding_mask(self) -> np.ndarray:
        return agreement_mask(self.x, self.y)

    def assert_protocol(self):
        assert int(self.encoding_mask.sum()) == self.ell, "agreement count drifted from ell"
        if self.fx is not None and self.fy is not None:
            assert self.fx >= self.fy, f"fitness order broken: f(x)={self.fx} < f(y)={self.fy}"
            assert self.fy == self.ell or self.fy == len(self.y), \
                f"f(y)={self.fy} does not match ell={self.ell}"


class BlockLearnState:
    """
    Candidate bookkeeping for one block of k positions sigma(l+1..l+k).

    Two interchangeable schemes keyed by offset c in [1..k]:
        - 'samples': keeps every sample w at level l+c-1 (X_c) and the
          candidate mask J_c = non-encoding positions where all of X_c
          differ from y'
        - 'trackers': keeps one string x^c per level; J_c is the agreement
          set of x^c and y'
    Both yield the same J_c for the same sample stream.
    """

    def __init__(self, pair: EncodingPair, y_prime: BitString, k: int, bookkeeping: str):
        if bookkeeping not in ('samples', 'trackers'):
            raise ValueError(f"Unknown bookkeeping scheme '{bookkeeping}'")
        self.pair = pair
        self.ell = pair.ell
        self.y_prime = y_prime
        self.k = k
        self.bookkeeping = bookkeeping
        self.encoding = pair.encoding_mask
        self.reset()

    def reset(self, y_prime: Optional[BitString] = None):
        if y_prime is not None:
            self.y_prime = y_prime
        levels = range(1, self.k + 1)
        if self.bookkeeping == 'samples':
            self.level_samples: Dict[int, List[BitString]] = {c: [] for c in levels}
            self._masks = {c: ~self.encoding for c in levels}
        else:
            self.trackers: Dict[int, BitString] = {
                c: flip_where_equal(self.y_prime, self.pair.x, self.pair.y) for c in levels
            }

    def absorb(self, c: int, w: BitString):
        """Record a sample whose fitness is l+c-1"""
        if self.bookkeeping == 'samples':
            self.level_samples[c].append(w)
            self._masks[c] &= (w != self.y_prime)
        else:
            self.trackers[c] = eliminate_agreeing(self.trackers[c], self.y_prime, w)

    def candidate_mask(self, c: int) -> np.ndarray:
        if self.bookkeeping == 'samples':
            return self._masks[c]
        return self.trackers[c] == self.y_prime

    def candidate_set(self, c: int) -> FrozenSet[int]:
        return frozenset(int(i) + 1 for i in np.flatnonzero(self.candidate_mask(c)))

    def candidate_sets(self) -> Dict[int, FrozenSet[int]]:
        return {c: self.candidate_set(c) for c in range(1, self.k + 1)}

    def recompute_candidates(self, c: int) -> FrozenSet[int]:
        """J_c rebuilt from the stored samples alone"""
        if self.bookkeeping != 'samples':
            raise ValueError("Only the sample-set scheme stores its samples")
        mask = ~self.encoding
        for w in self.level_samples[c]:
            mask = mask & (w != self.y_prime)
        return frozenset(int(i) + 1 for i in np.flatnonzero(mask))

    def sizes(self) -> List[int]:
        return [int(self.candidate_mask(c).sum()) for c in range(1, self.k + 1)]

    def resolved(self) -> bool:
        return all(size == 1 for size in self.sizes())

    def exhausted(self) -> bool:
        """Some J_c lost every candidate; only possible with misassigned samples"""
        return any(size == 0 for size in self.sizes())

    def fold(self, c: int, string: BitString) -> BitString:
        """Flip string at the single surviving candidate of level c"""
        if self.bookkeeping == 'samples':
            return flip_positions(string, self.candidate_set(c))
        return flip_where_equal(string, self.y_prime, self.trackers[c])


def _initial_pair(run: BlackBoxRun, rng: np.random.Generator) -> EncodingPair:
    """Complementary pair ordered so that the first string is the better one"""
    x = uniform_sample(run.n, rng)
    fx = run.ask(x)
    y = complement(x)
    fy = run.ask(y)
    # In rank mode fy > fx shows up as the later answer ranking higher
    if fy > fx:
        x, y, fx, fy = y, x, fy, fx
    if run.session.mode is OracleMode.RANKING:
        return EncodingPair(x=x, y=y, ell=0)
    return EncodingPair(x=x, y=y, ell=0, fx=fx, fy=fy)


def _encoded_opo_ea(run: BlackBoxRun, pair: EncodingPair, k: int, target: int,
                    rng: np.random.Generator) -> Tuple[BitString, int]:
    y_prime, f_prime = pair.y, pair.ell
    p = Fraction(1, k)
    while f_prime < target:
        sample = flip_disagreement_independently(y_prime, pair.x, pair.y, p, rng)
        f_sample = run.ask(sample)
        if f_sample > f_prime:
            y_prime, f_prime = sample, f_sample
    return y_prime, f_prime


def encoded_opo_ea(session: OracleSession, pair: EncodingPair, k: int, target: int,
                   rng: np.random.Generator, budget: Optional[int] = None) -> BitString:
    """
    Improve y by an encoded (1+1) EA until its fitness reaches target.

    Only the non-encoding positions of (x, y) are varied, each flipped with
    probability 1/k; a sample replaces y' only on strict improvement.

    Args:
        session: VALUE-mode session
        pair: l-encoding pair; pair.y has fitness pair.ell
        k: Inverse flip probability
        target: Fitness to reach, capped at n
        rng: Random source
        budget: Optional query budget

    Returns:
        y' with fitness >= min(target, n)
    """
    if session.mode is not OracleMode.VALUE:
        raise OracleError("encoded_opo_ea needs fitness values")
    run = BlackBoxRun(session, budget, stop_at_optimum=False)
    y_prime, _ = _encoded_opo_ea(run, pair, k, min(target, session.n), rng)
    return y_prime


def _fold_by_value(run: BlackBoxRun, pair: EncodingPair, state: BlockLearnState, c: int):
    if pair.fy <= pair.fx:
        keep, f_keep, flipped = pair.x, pair.fx, state.fold(c, pair.y)
    else:
        keep, f_keep, flipped = pair.y, pair.fy, state.fold(c, pair.x)
    f_flipped = run.ask(flipped)
    if f_flipped > f_keep:
        pair.x, pair.fx, pair.y, pair.fy = flipped, f_flipped, keep, f_keep
    else:
        pair.x, pair.fx, pair.y, pair.fy = keep, f_keep, flipped, f_flipped
    pair.ell += 1


def _learn_block_by_value(run: BlackBoxRun, pair: EncodingPair, k: int, rng: np.random.Generator,
                          bookkeeping: str, observer: Optional[RunObserver]):
    ell = pair.ell
    y_prime, _ = _encoded_opo_ea(run, pair, k, ell + k, rng)

    state = BlockLearnState(pair, y_prime, k, bookkeeping)
    p = Fraction(1, k)
    while not state.resolved():
        w = flip_disagreement_independently(y_prime, pair.x, pair.y, p, rng)
        fw = run.ask(w)
        if ell <= fw < ell + k:
            state.absorb(fw - ell + 1, w)
            if observer:
                observer.on_candidates(ell, state.candidate_sets())

    for c in range(1, k + 1):
        _fold_by_value(run, pair, state, c)
        pair.assert_protocol()
        if observer:
            observer.on_pair(pair)

    logger.debug(f"[BLOCK] ell {ell} -> {pair.ell} after {run.queries} queries")
    if observer:
        observer.on_block(ell, pair.ell, run.queries)


def _block_optimizer(session: OracleSession, rng: np.random.Generator, bookkeeping: str,
                     budget: Optional[int], observer: Optional[RunObserver], name: str) -> RunResult:
    if session.mode is not OracleMode.VALUE:
        raise OracleError(f"{name} needs fitness values; use the ranking optimizer for rank answers")
    n = session.n
    k = block_length(n)
    if n < MIN_BLOCK_DIMENSION or k < 2:
        return binary_search_baseline(session, rng, budget, observer)

    run = BlackBoxRun(session, budget)

    def body():
        pair = _initial_pair(run, rng)
        if observer:
            observer.on_pair(pair)
        limit = (n // k) * k
        while pair.ell + k <= limit:
            _learn_block_by_value(run, pair, k, rng, bookkeeping, observer)
        _encoded_opo_ea(run, pair, k, n, rng)

    return _run_to_result(run, body, name)


def star_ary_optimizer(session: OracleSession, rng: np.random.Generator,
                       budget: Optional[int] = None, observer: Optional[RunObserver] = None) -> RunResult:
    """
    Block learning with stored sample sets.

    Per block of k = ceil(sqrt(log2 n)) positions: push y' to fitness l+k
    with the encoded (1+1) EA, sample variations of y' until each level's
    candidate set J_c is a single position, then fold those positions into
    the encoding pair. Falls back to binary search for n < 16.
    """
    return _block_optimizer(session, rng, 'samples', budget, observer, 'star_ary')


def three_ary_optimizer(session: OracleSession, rng: np.random.Generator,
                        budget: Optional[int] = None, observer: Optional[RunObserver] = None) -> RunResult:
    """
    Block learning where each J_c is carried by one tracker string, so no
    variation reads more than three stored strings. Consumes the random
    source exactly like star_ary_optimizer and issues the same queries.
    """
    return _block_optimizer(session, rng, 'trackers', budget, observer, 'three_ary')


# Rank-only optimizer

def _ranked_encoded_opo_ea(run: BlackBoxRun, pair: EncodingPair, k: int, rng: np.random.Generator,
                           anchor_rank: int, stop_offset: Optional[int]) -> Tuple[BitString, int]:
    """
    Encoded (1+1) EA on rank answers, starting from y with current rank anchor_rank.

    A sample is accepted only if it still outranks y' after y' is re-queried,
    since new fitness values below f(y') shift its rank. A lower rank than
    y' also triggers the re-query. Stops once rank(y') - anchor_rank >=
    stop_offset (never when stop_offset is None).
    """
    y_prime, r_prime = pair.y, anchor_rank
    p = Fraction(1, k)
    while stop_offset is None or r_prime - anchor_rank < stop_offset:
        sample = flip_disagreement_independently(y_prime, pair.x, pair.y, p, rng)
        r_sample = run.ask(sample)
        if r_sample > r_prime:
            r_prime = run.ask(identity(y_prime))
            if r_sample > r_prime:
                y_prime, r_prime = sample, r_sample
        elif r_sample < r_prime:
            r_prime = run.ask(identity(y_prime))
    return y_prime, r_prime


def _identify_levels_by_rank(run: BlackBoxRun, pair: EncodingPair, state: BlockLearnState,
                             anchor_rank: int, r_prime: int, k: int, rng: np.random.Generator,
                             observer: Optional[RunObserver]) -> int:
    """
    Fill the trackers from samples whose rank lies within k of the anchor.

    y' is re-queried every ceil(e*k) samples and before finishing; a changed
    rank means a new fitness value appeared below f(y'), which may have
    shifted earlier level assignments, so the trackers start over.
    """
    ell = pair.ell
    cadence = math.ceil(math.e * k)
    p = Fraction(1, k)
    since_check = 0
    while True:
        if since_check >= cadence or state.resolved() or state.exhausted():
            since_check = 0
            r_now = run.ask(identity(state.y_prime))
            if r_now != r_prime or state.exhausted():
                r_prime = r_now
                state.reset()
                logger.debug(f"[RANKING] trackers reset at ell {ell} after {run.queries} queries")
                if observer:
                    observer.on_tracker_reset(ell, run.queries)
                continue
            if state.resolved():
                return r_prime

        w = flip_disagreement_independently(state.y_prime, pair.x, pair.y, p, rng)
        offset = run.ask(w) - anchor_rank
        since_check += 1
        if 0 <= offset < k:
            state.absorb(offset + 1, w)
            if observer:
                observer.on_candidates(ell, state.candidate_sets())


def _fold_by_rank(run: BlackBoxRun, pair: EncodingPair, state: BlockLearnState, c: int) -> bool:
    """Fold level c into the lower string y; False if the fold did not raise its fitness"""
    flipped = state.fold(c, pair.y)
    r_flipped = run.ask(flipped)
    r_lower = run.ask(identity(pair.y))
    if not r_lower < r_flipped:
        return False
    r_upper = run.ask(identity(pair.x))
    if r_flipped > r_upper:
        pair.x, pair.y = flipped, pair.x
    else:
        pair.y = flipped
    pair.ell += 1
    return True


def _learn_block_by_rank(run: BlackBoxRun, pair: EncodingPair, k: int, rng: np.random.Generator,
                         observer: Optional[RunObserver]):
    ell = pair.ell
    # Every query of this block has fitness >= ell, so the anchor rank stays put
    anchor_rank = run.ask(identity(pair.y))
    y_prime, r_prime = _ranked_encoded_opo_ea(run, pair, k, rng, anchor_rank, stop_offset=k)

    state = BlockLearnState(pair, y_prime, k, 'trackers')
    _identify_levels_by_rank(run, pair, state, anchor_rank, r_prime, k, rng, observer)

    for c in range(1, k + 1):
        if not _fold_by_rank(run, pair, state, c):
            logger.debug(f"[RANKING] fold of level {c} rejected at ell {pair.ell}")
            if observer:
                observer.on_fold_rejected(pair.ell, c)
            break
        pair.assert_protocol()
        if observer:
            observer.on_pair(pair)

    logger.debug(f"[BLOCK] ell {ell} -> {pair.ell} after {run.queries} queries (ranks)")
    if observer:
        observer.on_block(ell, pair.ell, run.queries)


def ranking_optimizer(session: OracleSession, rng: np.random.Generator,
                      budget: Optional[int] = None, observer: Optional[RunObserver] = None) -> RunResult:
    """
    The tracker-string block optimizer for sessions that only answer ranks.

    Fitness levels l..l+k-1 are told apart by rank offsets from the anchor
    rank of y. Folds are verified by re-querying, so a wrong level
    assignment can cost queries but never corrupts the encoding pair.
    """
    if session.mode is not OracleMode.RANKING:
        raise OracleError("ranking_optimizer needs a RANKING-mode session")
    n = session.n
    k = block_length(n)
    if n < MIN_BLOCK_DIMENSION or k < 2:
        return binary_search_baseline(session, rng, budget, observer)

    run = BlackBoxRun(session, budget)

    def body():
        pair = _initial_pair(run, rng)
        if observer:
            observer.on_pair(pair)
        limit = (n // k) * k
        while pair.ell + k <= limit:
            _learn_block_by_rank(run, pair, k, rng, observer)
        anchor_rank = run.ask(identity(pair.y))
        _ranked_encoded_opo_ea(run, pair, k, rng, anchor_rank, stop_offset=None)

    return _run_to_result(run, body, 'ranking')


# Baselines

def binary_search_baseline(session: OracleSession, rng: np.random.Generator,
                           budget: Optional[int] = None, observer: Optional[RunObserver] = None) -> RunResult:
    """
    Learn sigma(l+1) by halving the non-encoding candidates of y.

    Flipping a candidate subset S of y raises its fitness above l iff
    sigma(l+1) is in S. Probes use the first half of the sorted candidate
    list. With rank answers y is re-queried after each probe to compare.
    """
    run = BlackBoxRun(session, budget)
    ranked = session.mode is OracleMode.RANKING
    n = session.n

    def body():
        pair = _initial_pair(run, rng)
        if observer:
            observer.on_pair(pair)
        while pair.ell < n:
            candidates = [int(i) + 1 for i in np.flatnonzero(~pair.encoding_mask)]
            while len(candidates) > 1:
                half = candidates[:len(candidates) // 2]
                answer = run.ask(flip_positions(pair.y, half))
                if ranked:
                    inside = run.ask(identity(pair.y)) < answer
                else:
                    inside = answer > pair.ell
                candidates = half if inside else candidates[len(candidates) // 2:]

            flipped = flip_positions(pair.y, candidates)
            answer = run.ask(flipped)
            if ranked:
                higher = answer > run.ask(identity(pair.x))
            else:
                higher = answer > pair.fx
            if higher:
                pair.x, pair.y = flipped, pair.x
                if not ranked:
                    pair.fx, pair.fy = answer, pair.fx
            else:
                pair.y = flipped
                if not ranked:
                    pair.fy = answer
            pair.ell += 1
            if observer:
                observer.on_pair(pair)

    return _run_to_result(run, body, 'binary_search')


def opo_ea_baseline(session: OracleSession, rng: np.random.Generator, mutation_p: Optional[float] = None,
                    budget: Optional[int] = None, observer: Optional[RunObserver] = None) -> RunResult:
    """(1+1) EA with standard bit mutation (default rate 1/n); accepts ties"""
    if session.mode is not OracleMode.VALUE:
        raise OracleError("opo_ea_baseline needs fitness values")
    n = session.n
    p = Fraction(1, n) if mutation_p is None else mutation_p
    run = BlackBoxRun(session, budget)

    def body():
        x = uniform_sample(n, rng)
        fx = run.ask(x)
        while True:
            y = standard_bit_mutation(x, p, rng)
            fy = run.ask(y)
            if fy >= fx:
                x, fx = y, fy

    return _run_to_result(run, body, 'opo_ea')


ALGORITHMS: Dict[str, Callable[..., RunResult]] = {
    'opo_ea': opo_ea_baseline,
    'binary_search': binary_search_baseline,
    'star_ary': star_ary_optimizer,
    'three_ary': three_ary_optimizer,
    'ranking': ranking_optimizer,
}
