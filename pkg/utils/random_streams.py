"""
Random Streams
Seedable, splittable counter-based generators keyed by experiment coordinates
"""

import numpy as np


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Build an independent Philox stream for a (seed, keys...) coordinate

    The same coordinate always yields the same stream; distinct coordinates
    (for example (repetition, fold)) yield statistically independent streams.

    Args:
        seed: Root seed of the run
        keys: Nonnegative integers naming the sub-stream

    Returns:
        numpy Generator backed by the Philox bit generator
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *keys: int) -> int:
    """Integer seed for libraries that only accept an int random_state"""
    return int(make_rng(seed, *keys).integers(0, 2**31 - 1))
