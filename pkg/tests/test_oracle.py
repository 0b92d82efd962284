import itertools
from collections import Counter

import numpy as np
import pytest

from oracle import (
    Instance,
    OracleError,
    OracleMode,
    OracleSession,
    Permutation,
    bitstring_from_str,
    bitstring_to_str,
    evaluate,
    make_instance,
    rank_sequence,
)
from verification import chi_square_uniformity


def scan_fitness(instance, x):
    for j in range(1, instance.n + 1):
        i = instance.sigma(j) - 1
        if x[i] != instance.z[i]:
            return j - 1
    return instance.n


def string_with_fitness(instance, value):
    x = np.array(instance.z, dtype=np.uint8)
    if value < instance.n:
        x[instance.sigma(value + 1) - 1] ^= 1
    return x


@pytest.fixture
def small_instance():
    return Instance(n=4, z=bitstring_from_str('0110'), sigma=Permutation((3, 1, 4, 2)))


def test_make_instance_dimension_one(rng):
    instance = make_instance(1, rng)
    assert instance.sigma.mapping == (1,)
    assert instance.z.tolist() in ([0], [1])


def test_make_instance_rejects_empty_dimension(rng):
    with pytest.raises(OracleError):
        make_instance(0, rng)


def test_make_instance_is_deterministic_per_seed():
    a = make_instance(50, np.random.default_rng(7))
    b = make_instance(50, np.random.default_rng(7))
    c = make_instance(50, np.random.default_rng(8))
    assert a == b
    assert hash(a) == hash(b)
    assert a != c


def test_make_instance_permutations_and_targets_are_uniform(rng):
    draws = [make_instance(3, rng) for _ in range(6000)]
    perm_counts = Counter(instance.sigma.mapping for instance in draws)
    z_counts = Counter(bitstring_to_str(instance.z) for instance in draws)
    assert len(perm_counts) == 6
    assert len(z_counts) == 8
    assert chi_square_uniformity(list(perm_counts.values())) > 1e-3
    assert chi_square_uniformity(list(z_counts.values())) > 1e-3


def test_instance_is_immutable(small_instance):
    with pytest.raises(ValueError):
        small_instance.z[0] = 1
    with pytest.raises(AttributeError):
        small_instance.n = 5


def test_permutation_validation():
    with pytest.raises(OracleError):
        Permutation((1, 1, 2))
    with pytest.raises(OracleError):
        Permutation((0, 1))
    assert Permutation.identity(3).mapping == (1, 2, 3)
    assert Permutation((3, 1, 2))(1) == 3


def test_evaluate_worked_example(small_instance):
    # sigma(1) = 3 and z_3 = 1 while x_3 = 0
    assert evaluate(small_instance, bitstring_from_str('1100')) == 0
    assert evaluate(small_instance, bitstring_from_str('1110')) == 1
    assert evaluate(small_instance, bitstring_from_str('0110')) == 4
    assert evaluate(small_instance, bitstring_from_str('1001')) == 0
    for x in ('1100', '1110', '0111', '0010'):
        bits = bitstring_from_str(x)
        assert evaluate(small_instance, bits) == scan_fitness(small_instance, bits)


def test_evaluate_matches_scan_exhaustively():
    rng = np.random.default_rng(3)
    for n in range(1, 8):
        for _ in range(3):
            instance = make_instance(n, rng)
            for bits in itertools.product((0, 1), repeat=n):
                x = np.array(bits, dtype=np.uint8)
                value = evaluate(instance, x)
                assert value == scan_fitness(instance, x)
                assert (value == n) == bool(np.array_equal(x, instance.z))


def test_evaluate_flip_structure(rng):
    instance = make_instance(12, rng)
    for _ in range(50):
        x = rng.integers(0, 2, size=12, dtype=np.uint8)
        value = evaluate(instance, x)
        for j in range(1, value + 1):
            y = x.copy()
            y[instance.sigma(j) - 1] ^= 1
            assert evaluate(instance, y) == j - 1
        if value < 12:
            y = x.copy()
            y[instance.sigma(value + 1) - 1] ^= 1
            assert evaluate(instance, y) > value


def test_evaluate_rejects_wrong_length(small_instance):
    with pytest.raises(OracleError):
        evaluate(small_instance, bitstring_from_str('010'))


def test_value_session_counts_queries(small_instance):
    session = OracleSession(small_instance)
    assert session.query(bitstring_from_str('1110')) == 1
    assert session.query(bitstring_from_str('0110')) == 4
    assert session.query(bitstring_from_str('0110')) == 4
    assert session.query_count == 3
    assert session.optimum_query_index == 2
    assert session.solved
    assert session.value_history == []


def test_ranking_session_dense_ranks(rng):
    instance = make_instance(12, rng)
    session = OracleSession(instance, OracleMode.RANKING)
    answers = [session.query(string_with_fitness(instance, v)) for v in (2, 5, 2, 9, 5)]
    assert answers == [1, 2, 1, 3, 2]
    assert session.rank_of(5) == 2
    assert session.rank_of(9) == 3
    assert session.value_history == [2, 5, 2, 9, 5]
    with pytest.raises(OracleError):
        session.rank_of(4)


def test_rank_of_needs_ranking_mode(small_instance):
    session = OracleSession(small_instance)
    session.query(bitstring_from_str('0110'))
    with pytest.raises(OracleError):
        session.rank_of(4)


def test_ranking_answers_invariant_under_monotone_transform(rng):
    instance = make_instance(30, rng)
    plain = OracleSession(instance, OracleMode.RANKING)
    shifted = OracleSession(instance, OracleMode.RANKING, fitness_transform=lambda v: 3 * v + 1)
    for _ in range(200):
        x = rng.integers(0, 2, size=30, dtype=np.uint8)
        assert plain.query(x) == shifted.query(x)


def test_transform_requires_ranking_mode(small_instance):
    with pytest.raises(OracleError):
        OracleSession(small_instance, OracleMode.VALUE, fitness_transform=lambda v: v + 1)


def test_rank_sequence():
    assert rank_sequence([2, 5, 2, 9, 5]) == [1, 2, 1, 3, 2]
    assert rank_sequence([4, 3, 2, 1]) == [1, 1, 1, 1]
    assert rank_sequence([]) == []


def test_query_log_records_strings(small_instance):
    session = OracleSession(small_instance, record_queries=True)
    session.query(bitstring_from_str('1100'))
    session.query(bitstring_from_str('0110'))
    assert session.query_log == [bytes([1, 1, 0, 0]), bytes([0, 1, 1, 0])]


def test_instance_serialization(small_instance):
    assert small_instance.to_dict() == {'n': 4, 'z': '0110', 'sigma': [3, 1, 4, 2]}
    restored = Instance.from_json(small_instance.to_json())
    assert restored == small_instance
    assert Instance.from_json('{"n": 4, "z": "0110", "sigma": [3, 1, 4, 2]}') == small_instance


@pytest.mark.parametrize('data', [
    {'n': 4, 'z': '0110'},
    {'n': 4, 'z': '011', 'sigma': [3, 1, 4, 2]},
    {'n': 4, 'z': '0120', 'sigma': [3, 1, 4, 2]},
    {'n': 4, 'z': '0110', 'sigma': [3, 1, 1, 2]},
    {'n': 3, 'z': '0110', 'sigma': [3, 1, 4, 2]},
])
def test_instance_rejects_malformed_data(data):
    with pytest.raises(OracleError):
        Instance.from_dict(data)
