"""
Oracle Module
Hidden LeadingOnes instances LO_{z,sigma} and the query-counting session that
guards them.

An algorithm only ever holds an OracleSession and sees the answers returned by
OracleSession.query(); the instance (z, sigma) stays behind the session.

POSITION CONVENTION:
    Positions are 1-indexed everywhere in the public API and in serialized
    formats, matching the [n] notation. Bit strings are numpy uint8 arrays, so
    position i lives at array index i - 1.

SERIALIZED INSTANCE:
    {"n": 4, "z": "0110", "sigma": [3, 1, 4, 2]}

    Where:
        - z: 0/1 string, position 1 first
        - sigma: [sigma(1), ..., sigma(n)]
"""

import bisect
import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, Any, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from logger import get_logger

logger = get_logger('lo_lab.oracle')

BitString = npt.NDArray[np.uint8]


class OracleError(ValueError):
    """Raised when a query or instance violates the oracle's contract"""


class OracleMode(Enum):
    """What a session reveals per query"""
    VALUE = "value"
    RANKING = "ranking"


def bitstring_from_str(bits: str) -> BitString:
    """
    Parse a 0/1 string into a bit string.

    Args:
        bits: String such as "0110", position 1 first

    Returns:
        uint8 array of the same length
    """
    if not bits or any(ch not in '01' for ch in bits):
        raise OracleError(f"Not a 0/1 string: '{bits}'")
    return np.frombuffer(bits.encode('ascii'), dtype=np.uint8) - ord('0')


def bitstring_to_str(x: BitString) -> str:
    """Render a bit string as a 0/1 string, position 1 first"""
    return ''.join('1' if bit else '0' for bit in x)


@dataclass(frozen=True)
class Permutation:
    """A permutation sigma of [1..n], stored as (sigma(1), ..., sigma(n))"""

    mapping: Tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(i) for i in self.mapping)
        object.__setattr__(self, 'mapping', mapping)
        if sorted(mapping) != list(range(1, len(mapping) + 1)):
            raise OracleError(f"Not a permutation of [1..{len(mapping)}]: {list(mapping)}")

    @property
    def n(self) -> int:
        return len(self.mapping)

    @cached_property
    def indices(self) -> npt.NDArray[np.intp]:
        """0-based array indices in sigma-order"""
        order = np.asarray(self.mapping, dtype=np.intp) - 1
        order.flags.writeable = False
        return order

    def __call__(self, j: int) -> int:
        """sigma(j) for 1 <= j <= n"""
        return self.mapping[j - 1]

    @classmethod
    def identity(cls, n: int) -> 'Permutation':
        return cls(tuple(range(1, n + 1)))


@dataclass(frozen=True, eq=False)
class Instance:
    """The hidden pair (z, sigma) defining LO_{z,sigma}; immutable after creation"""

    n: int
    z: BitString
    sigma: Permutation

    def __post_init__(self):
        if self.n < 1:
            raise OracleError(f"Dimension must be at least 1, got {self.n}")
        z = np.array(self.z, dtype=np.uint8)
        if z.shape != (self.n,) or np.any(z > 1):
            raise OracleError(f"z must be a 0/1 string of length {self.n}")
        if self.sigma.n != self.n:
            raise OracleError(f"sigma covers [1..{self.sigma.n}], expected [1..{self.n}]")
        z.flags.writeable = False
        object.__setattr__(self, 'z', z)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self.n == other.n and self.sigma == other.sigma and np.array_equal(self.z, other.z)

    def __hash__(self) -> int:
        return hash((self.n, self.z.tobytes(), self.sigma))

    def to_dict(self) -> Dict[str, Any]:
        return {'n': self.n, 'z': bitstring_to_str(self.z), 'sigma': list(self.sigma.mapping)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Instance':
        try:
            n = int(data['n'])
            z = bitstring_from_str(data['z'])
            sigma = Permutation(tuple(data['sigma']))
        except (KeyError, TypeError) as e:
            raise OracleError(f"Malformed instance: {e}") from e
        return cls(n=n, z=z, sigma=sigma)

    @classmethod
    def from_json(cls, text: str) -> 'Instance':
        return cls.from_dict(json.loads(text))


def make_instance(n: int, rng: np.random.Generator) -> Instance:
    """
    Draw a uniform instance of the LEADINGONES_n class.

    Args:
        n: Dimension, at least 1
        rng: Random source; the same seed yields the same instance

    Returns:
        Instance with z uniform over {0,1}^n and sigma uniform over S_n
    """
    if n < 1:
        raise OracleError(f"Dimension must be at least 1, got {n}")
    z = rng.integers(0, 2, size=n, dtype=np.uint8)
    sigma = Permutation(tuple(int(i) + 1 for i in rng.permutation(n)))
    return Instance(n=n, z=z, sigma=sigma)


def _check_length(x: BitString, n: int) -> BitString:
    x = np.asarray(x)
    if x.shape != (n,):
        raise OracleError(f"Query has length {x.shape[0] if x.ndim == 1 else x.shape}, expected {n}")
    return x


def evaluate(instance: Instance, x: BitString) -> int:
    """
    LO_{z,sigma}(x): the longest sigma-ordered prefix on which x agrees with z.

    Args:
        instance: Hidden instance
        x: Bit string of length instance.n

    Returns:
        Fitness in [0..n]; n iff x == z
    """
    x = _check_length(x, instance.n)
    order = instance.sigma.indices
    mismatches = np.flatnonzero(x[order] != instance.z[order])
    return int(mismatches[0]) if mismatches.size else instance.n


class OracleSession:
    """
    Query-counted access to one hidden instance.

    In VALUE mode a query answers the fitness. In RANKING mode it answers the
    dense rank of the fitness among all fitness values queried so far
    (smallest = 1, equal values share a rank); the rank describes only the
    latest query.

    Not thread-safe: one session per trial.
    """

    def __init__(
        self,
        instance: Instance,
        mode: OracleMode = OracleMode.VALUE,
        fitness_transform: Optional[Callable[[int], float]] = None,
        record_queries: bool = False
    ):
        if fitness_transform is not None and mode is not OracleMode.RANKING:
            raise OracleError("A fitness transform is only meaningful in RANKING mode")
        self.instance = instance
        self.mode = mode
        self.fitness_transform = fitness_transform
        self.query_count = 0
        self.optimum_query_index: Optional[int] = None
        self.value_history: List[float] = []
        self._distinct_values: List[float] = []
        self.record_queries = record_queries
        self.query_log: List[bytes] = []

    @property
    def n(self) -> int:
        """Dimension; public knowledge for every algorithm"""
        return self.instance.n

    @property
    def solved(self) -> bool:
        return self.optimum_query_index is not None

    def query(self, x: BitString) -> int:
        """
        Answer one query.

        Args:
            x: Bit string of length n

        Returns:
            Fitness (VALUE mode) or dense rank of the fitness (RANKING mode)
        """
        fitness = evaluate(self.instance, x)
        self.query_count += 1
        if self.record_queries:
            self.query_log.append(np.asarray(x, dtype=np.uint8).tobytes())
        if fitness == self.instance.n and self.optimum_query_index is None:
            self.optimum_query_index = self.query_count
            logger.debug(f"[TRIAL] optimum first queried at query {self.query_count} (n={self.instance.n})")

        if self.mode is OracleMode.VALUE:
            return fitness

        value = self.fitness_transform(fitness) if self.fitness_transform else fitness
        self.value_history.append(value)
        position = bisect.bisect_left(self._distinct_values, value)
        if position == len(self._distinct_values) or self._distinct_values[position] != value:
            self._distinct_values.insert(position, value)
        return self.rank_of(value)

    def rank_of(self, fitness: float) -> int:
        """
        Dense rank of a fitness value already present in the history.

        Args:
            fitness: A value previously appended by query()

        Returns:
            1 + number of distinct history values strictly below fitness
        """
        if self.mode is not OracleMode.RANKING:
            raise OracleError("rank_of() is only available in RANKING mode")
        position = bisect.bisect_left(self._distinct_values, fitness)
        if position == len(self._distinct_values) or self._distinct_values[position] != fitness:
            raise OracleError(f"Fitness {fitness} has not been queried in this session")
        return position + 1


def rank_sequence(values: Sequence[float]) -> List[int]:
    """Dense ranks a ranking session would report for a stream of fitness values"""
    distinct: List[float] = []
    ranks = []
    for value in values:
        position = bisect.bisect_left(distinct, value)
        if position == len(distinct) or distinct[position] != value:
            distinct.insert(position, value)
        ranks.append(position + 1)
    return ranks
