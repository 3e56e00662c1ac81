"""
Seeded random streams.

Every stream is numpy's PCG64 bit generator, so a seed reproduces the same
draws on every platform numpy supports. Independent streams (trials, shards)
come from ``SeedSequence`` children rather than from offset seeds.
"""
from typing import List

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(seed: int, trial: int) -> int:
    """One 63-bit master seed per (seed, trial) pair."""
    state = np.random.SeedSequence([seed, trial]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return make_rng(trial_seed(seed, trial))


def spawn_rngs(seed: int, count: int) -> List[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(child)) for child in np.random.SeedSequence(seed).spawn(count)]


def split_seed(seed: int, trial: int) -> int:
    """``trial_seed`` folded into 32 bits, the range sklearn's ``random_state`` accepts."""
    return trial_seed(seed, trial) % 2**32
