"""
Random Streams
Index-derived random streams so sample i is identical for any worker count
"""

from typing import List

import numpy as np


def spawn_seeds(seed: int, count: int) -> List[np.random.SeedSequence]:
    """Child seed sequences of the master seed, one per sample index"""
    return np.random.SeedSequence(int(seed)).spawn(int(count))


def stream(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    """Generator for one sample"""
    return np.random.default_rng(seed_seq)


def master_stream(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))
