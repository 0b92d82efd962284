"""
Trial ID Utilities
Centralized management for trial ID format, parsing and per-trial seeds.

A trial is identified by its algorithm, dimension and index within the size.
The seed of a trial is a pure function of (base_seed, algorithm, n,
trial_index), so adding sizes or algorithms never changes the streams of
existing trials.

FORMAT SPECIFICATION:
    "algorithm|n|trial_index"

    Where:
        - algorithm: One of ALGORITHM_IDS (e.g., "three_ary")
        - n: Dimension (e.g., "1024")
        - trial_index: 0-based index within the size (e.g., "17")
        - Separator: Single pipe character (|)

EXAMPLES:
    Input:
        algorithm = "three_ary"
        n = 1024
        trial_index = 17

    Output:
        "three_ary|1024|17"

USAGE:
    from trial_id_utils import create_trial_id, parse_trial_id, derive_trial_seed

    trial_id = create_trial_id("three_ary", 1024, 17)
    parts = parse_trial_id(trial_id)
    seed = derive_trial_seed(20110101, "three_ary", 1024, 17)
"""

from typing import Dict, Optional, Tuple, Union

import numpy as np


SEPARATOR = '|'
EXPECTED_PARTS = 3

# Append only; the position of a name is part of its trials' seeds
ALGORITHM_IDS: Tuple[str, ...] = ('opo_ea', 'binary_search', 'star_ary', 'three_ary', 'ranking')


def create_trial_id(algorithm: str, n: int, trial_index: int) -> str:
    """
    Create a full trial ID from its component parts.

    Args:
        algorithm: Algorithm name
        n: Dimension
        trial_index: Index of the trial within its size

    Returns:
        Full trial ID in format "algorithm|n|trial_index"

    Example:
        >>> create_trial_id("binary_search", 256, 3)
        "binary_search|256|3"
    """
    return f"{algorithm}{SEPARATOR}{n}{SEPARATOR}{trial_index}"


def parse_trial_id(trial_id: str) -> Dict[str, Optional[Union[str, int]]]:
    """
    Parse a full trial ID into its component parts.

    Args:
        trial_id: Full trial ID in format "algorithm|n|trial_index"

    Returns:
        Dictionary with keys: 'algorithm', 'n', 'trial_index'
        Returns None values if parsing fails
    """
    parts = trial_id.split(SEPARATOR)

    if len(parts) != EXPECTED_PARTS or not parts[1].isdigit() or not parts[2].isdigit():
        return {
            'algorithm': None,
            'n': None,
            'trial_index': None
        }

    return {
        'algorithm': parts[0],
        'n': int(parts[1]),
        'trial_index': int(parts[2])
    }


def algorithm_id(algorithm: str) -> int:
    """Stable numeric ID of an algorithm name"""
    try:
        return ALGORITHM_IDS.index(algorithm)
    except ValueError:
        raise ValueError(f"Unknown algorithm '{algorithm}', expected one of {', '.join(ALGORITHM_IDS)}")


def derive_trial_seed(base_seed: int, algorithm: str, n: int, trial_index: int) -> int:
    """
    Derive the 64-bit seed of one trial.

    The base seed is the entropy and (algorithm id, n, trial_index) the
    spawn key of a numpy SeedSequence, whose hashing mixes all four inputs.

    Example:
        >>> derive_trial_seed(1, "opo_ea", 8, 0) == derive_trial_seed(1, "opo_ea", 8, 0)
        True
    """
    sequence = np.random.SeedSequence(
        entropy=int(base_seed),
        spawn_key=(algorithm_id(algorithm), int(n), int(trial_index))
    )
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def trial_generators(trial_seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Independent (instance, algorithm) random streams of one trial"""
    instance_seq, algorithm_seq = np.random.SeedSequence(int(trial_seed)).spawn(2)
    return np.random.default_rng(instance_seq), np.random.default_rng(algorithm_seq)
