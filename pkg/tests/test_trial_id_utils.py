import numpy as np
import pytest

from trial_id_utils import algorithm_id, create_trial_id, derive_trial_seed, parse_trial_id, trial_generators


def test_trial_id_round_trip():
    trial_id = create_trial_id('three_ary', 1024, 17)
    assert trial_id == 'three_ary|1024|17'
    assert parse_trial_id(trial_id) == {'algorithm': 'three_ary', 'n': 1024, 'trial_index': 17}


@pytest.mark.parametrize('bad', ['three_ary|1024', 'three_ary|x|1', 'a|1|2|3', ''])
def test_parse_invalid_ids(bad):
    assert parse_trial_id(bad) == {'algorithm': None, 'n': None, 'trial_index': None}


def test_algorithm_ids_are_stable():
    assert algorithm_id('opo_ea') == 0
    assert algorithm_id('ranking') == 4
    with pytest.raises(ValueError):
        algorithm_id('quantum')


def test_trial_seeds():
    seed = derive_trial_seed(20110101, 'three_ary', 1024, 17)
    assert seed == derive_trial_seed(20110101, 'three_ary', 1024, 17)
    assert 0 <= seed < 2 ** 64
    others = {
        derive_trial_seed(20110102, 'three_ary', 1024, 17),
        derive_trial_seed(20110101, 'star_ary', 1024, 17),
        derive_trial_seed(20110101, 'three_ary', 2048, 17),
        derive_trial_seed(20110101, 'three_ary', 1024, 18),
    }
    assert seed not in others
    assert len(others) == 4


def test_trial_generators_are_reproducible_and_distinct():
    first_instance, first_algorithm = trial_generators(7)
    second_instance, second_algorithm = trial_generators(7)
    a = first_instance.integers(0, 2 ** 32, size=4)
    assert np.array_equal(a, second_instance.integers(0, 2 ** 32, size=4))
    assert np.array_equal(first_algorithm.random(3), second_algorithm.random(3))
    assert not np.array_equal(a, first_algorithm.integers(0, 2 ** 32, size=4))
