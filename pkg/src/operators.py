"""
Variation Operators
Unbiased variation operators on bit strings, each tagged with its arity.

Every public operator is registered with an OperatorDescriptor. While a
recording() block is active, each call appends a VariationEvent to the
current VariationTrace so an algorithm's arity can be audited afterwards.

POSITIONS:
    Sets of positions (agreement_set, flip_positions) are 1-indexed.

USAGE:
    from operators import recording, flip_disagreement_independently

    with recording() as trace:
        child = flip_disagreement_independently(y_prime, x, y, Fraction(1, k), rng)
    print(trace.max_arity)
"""

import functools
import inspect
import itertools
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from oracle import BitString


Probability = Union[Fraction, float, int]


class OperatorError(ValueError):
    """Raised when an operator receives inconsistent arguments"""


@dataclass(frozen=True)
class OperatorDescriptor:
    """Static metadata of a registered operator"""
    name: str
    arity: int
    parameters: Tuple[str, ...] = ()
    unbiased: bool = True


@dataclass(frozen=True)
class VariationEvent:
    """One operator application observed while recording"""
    operator: str
    arity: int
    unbiased: bool
    parameters: Dict[str, Fraction] = field(default_factory=dict)


class VariationTrace:
    """Ordered log of variation events of one recording block"""

    def __init__(self):
        self.events: List[VariationEvent] = []

    def append(self, event: VariationEvent):
        self.events.append(event)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[VariationEvent]:
        return iter(self.events)

    @property
    def max_arity(self) -> int:
        return max((event.arity for event in self.events), default=0)

    def counts(self) -> Dict[str, int]:
        """Number of applications per operator name"""
        counts: Dict[str, int] = {}
        for event in self.events:
            counts[event.operator] = counts.get(event.operator, 0) + 1
        return counts


REGISTRY: Dict[str, OperatorDescriptor] = {}

_active_trace: ContextVar[Optional[VariationTrace]] = ContextVar('lo_lab_variation_trace', default=None)


@contextmanager
def recording():
    """Record every operator call made in this context (per thread) into a fresh trace"""
    trace = VariationTrace()
    token = _active_trace.set(trace)
    try:
        yield trace
    finally:
        _active_trace.reset(token)


def variation_operator(name: str, arity: int, parameters: Tuple[str, ...] = (), unbiased: bool = True):
    """Register an operator and make its calls visible to recording()"""
    descriptor = OperatorDescriptor(name=name, arity=arity, parameters=parameters, unbiased=unbiased)

    def decorator(func: Callable) -> Callable:
        signature = inspect.signature(func)

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            trace = _active_trace.get()
            if trace is not None:
                bound = signature.bind(*args, **kwargs)
                values = {p: Fraction(bound.arguments[p]) for p in parameters if p in bound.arguments}
                trace.append(VariationEvent(name, arity, unbiased, values))
            return func(*args, **kwargs)

        wrapper.descriptor = descriptor
        REGISTRY[name] = descriptor
        return wrapper

    return decorator


def _as_bits(x: BitString) -> BitString:
    return np.asarray(x, dtype=np.uint8)


def _same_length(*strings: BitString) -> Tuple[BitString, ...]:
    arrays = tuple(_as_bits(s) for s in strings)
    lengths = {a.shape for a in arrays}
    if len(lengths) != 1:
        raise OperatorError(f"Bit strings differ in length: {sorted(a.shape[0] for a in arrays)}")
    return arrays


def _check_probability(p: Probability) -> float:
    if not 0 <= p <= 1:
        raise OperatorError(f"Probability must lie in [0, 1], got {p}")
    return float(p)


def agreement_mask(x: BitString, y: BitString) -> npt.NDArray[np.bool_]:
    """Boolean mask of the positions where x and y coincide"""
    x, y = _same_length(x, y)
    return x == y


def agreement_set(x: BitString, y: BitString) -> FrozenSet[int]:
    """
    B(x, y): the 1-indexed positions where x and y coincide.

    Args:
        x: Bit string
        y: Bit string of the same length

    Returns:
        Frozen set of positions in [1..n]
    """
    return frozenset(int(i) + 1 for i in np.flatnonzero(agreement_mask(x, y)))


def _apply_flips(base: BitString, positions: npt.NDArray[np.intp], decisions: npt.NDArray[np.bool_]) -> BitString:
    out = base.copy()
    out[positions[decisions]] ^= 1
    return out


@variation_operator('uniform_sample', arity=0)
def uniform_sample(n: int, rng: np.random.Generator) -> BitString:
    """Uniformly random string of length n"""
    if n < 1:
        raise OperatorError(f"Dimension must be at least 1, got {n}")
    return rng.integers(0, 2, size=n, dtype=np.uint8)


@variation_operator('complement', arity=1)
def complement(x: BitString) -> BitString:
    return _as_bits(x) ^ 1


@variation_operator('identity', arity=1)
def identity(x: BitString) -> BitString:
    """A copy of x; how algorithms re-query a stored string"""
    return _as_bits(x).copy()


@variation_operator('flip_disagreement_independently', arity=3, parameters=('p',))
def flip_disagreement_independently(
    base: BitString,
    x: BitString,
    y: BitString,
    p: Probability,
    rng: np.random.Generator
) -> BitString:
    """
    Flip each position where x and y disagree independently with probability p.

    Positions where x and y agree are copied from base unchanged. Exactly one
    uniform draw is consumed per disagreement position.

    Args:
        base: String to vary
        x: First reference string
        y: Second reference string
        p: Flip probability in [0, 1]
        rng: Random source

    Returns:
        New bit string
    """
    base, x, y = _same_length(base, x, y)
    threshold = _check_probability(p)
    positions = np.flatnonzero(x != y)
    return _apply_flips(base, positions, rng.random(positions.size) < threshold)


@variation_operator('flip_where_equal', arity=3)
def flip_where_equal(w: BitString, a: BitString, b: BitString) -> BitString:
    """Flip w exactly where a and b coincide"""
    w, a, b = _same_length(w, a, b)
    return w ^ (a == b).astype(np.uint8)


@variation_operator('eliminate_agreeing', arity=3)
def eliminate_agreeing(tracker: BitString, reference: BitString, sample: BitString) -> BitString:
    """Flip tracker where tracker, reference and sample all coincide"""
    tracker, reference, sample = _same_length(tracker, reference, sample)
    return tracker ^ ((tracker == reference) & (reference == sample)).astype(np.uint8)


@variation_operator('standard_bit_mutation', arity=1, parameters=('p',))
def standard_bit_mutation(x: BitString, p: Probability, rng: np.random.Generator) -> BitString:
    """Flip every position independently with probability p"""
    x = _as_bits(x)
    threshold = _check_probability(p)
    return _apply_flips(x, np.arange(x.size), rng.random(x.size) < threshold)


@variation_operator('flip_positions', arity=1, unbiased=False)
def flip_positions(x: BitString, positions: Iterable[int]) -> BitString:
    """
    x XOR e_I for a set I of 1-indexed positions.

    Position-dependent, hence not unbiased; only the unrestricted
    (*-ary) algorithm may use it.
    """
    x = _as_bits(x)
    indices = np.fromiter((int(i) for i in positions), dtype=np.intp)
    if indices.size and (indices.min() < 1 or indices.max() > x.size):
        raise OperatorError(f"Positions must lie in [1..{x.size}], got {sorted(indices.tolist())}")
    out = x.copy()
    out[np.unique(indices) - 1] ^= 1
    return out


# Exact output distributions, for invariance checks on small n

def bits_from_int(value: int, n: int) -> BitString:
    """Position i holds bit i-1 of value"""
    return np.array([(value >> i) & 1 for i in range(n)], dtype=np.uint8)


def int_from_bits(x: BitString) -> int:
    return sum(int(bit) << i for i, bit in enumerate(x))


def _product_bernoulli(base: BitString, positions: npt.NDArray[np.intp], p: Fraction) -> Dict[int, Fraction]:
    distribution: Dict[int, Fraction] = {}
    for pattern in itertools.product((False, True), repeat=positions.size):
        decisions = np.array(pattern, dtype=bool)
        flips = int(decisions.sum())
        probability = p ** flips * (1 - p) ** (positions.size - flips)
        if probability == 0:
            continue
        outcome = int_from_bits(_apply_flips(base, positions, decisions))
        distribution[outcome] = distribution.get(outcome, Fraction(0)) + probability
    return distribution


def exact_distribution(name: str, args: Tuple[BitString, ...], p: Optional[Fraction] = None,
                       positions: Iterable[int] = ()) -> Dict[int, Fraction]:
    """
    Exact output distribution of a registered operator.

    Args:
        name: Registered operator name
        args: The operator's bit-string arguments, all of one length
        p: Flip probability for the randomized operators
        positions: 1-indexed set for flip_positions

    Returns:
        Mapping from output (as int, position i at bit i-1) to probability
    """
    if name not in REGISTRY:
        raise OperatorError(f"Unknown operator '{name}'")
    if len(args) != REGISTRY[name].arity:
        raise OperatorError(f"{name} takes {REGISTRY[name].arity} strings, got {len(args)}")

    if name == 'flip_disagreement_independently':
        base, x, y = _same_length(*args)
        return _product_bernoulli(base, np.flatnonzero(x != y), Fraction(p))
    if name == 'standard_bit_mutation':
        x = _as_bits(args[0])
        return _product_bernoulli(x, np.arange(x.size), Fraction(p))

    deterministic = {
        'complement': lambda: complement(*args),
        'identity': lambda: identity(*args),
        'flip_where_equal': lambda: flip_where_equal(*args),
        'eliminate_agreeing': lambda: eliminate_agreeing(*args),
        'flip_positions': lambda: flip_positions(*args, positions),
    }
    if name not in deterministic:
        raise OperatorError(f"No exact distribution for '{name}'")
    return {int_from_bits(deterministic[name]()): Fraction(1)}


def arity_mismatches() -> List[str]:
    """Registered operators whose declared arity differs from their bit-string parameter count"""
    mismatches = []
    for name, descriptor in REGISTRY.items():
        func = globals()[name]
        counted = sum(
            1 for parameter in inspect.signature(func).parameters.values()
            if parameter.annotation == BitString
        )
        if counted != descriptor.arity:
            mismatches.append(f"{name}: declared arity {descriptor.arity}, takes {counted} strings")
    return mismatches
