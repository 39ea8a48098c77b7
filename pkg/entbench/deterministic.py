"""
Deterministic seed handling for entbench.

Every random draw in a run comes from a generator derived from one master
seed plus a tuple of integer keys (replicate, job index, ...). The same keys
always give the same stream, whatever order jobs finish in.
"""

from typing import Sequence

import numpy as np
from loguru import logger

# Fixed seed used when the caller gives none
DEFAULT_SEED = 9527


def _entropy(master: int, keys: Sequence[int]) -> list[int]:
    if master < 0:
        raise ValueError(f"Seed must be non-negative, got {master}")
    for key in keys:
        if key < 0:
            raise ValueError(f"Seed keys must be non-negative, got {key}")
    return [int(master), *[int(k) for k in keys]]


def derive_seed(master: int, *keys: int) -> int:
    """
    Derive a child seed from a master seed.

    Args:
        master: Master seed of the run
        *keys: Integer path identifying the job (replicate, circuit index, ...)

    Returns:
        A 63-bit integer seed
    """
    sequence = np.random.SeedSequence(_entropy(master, keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0]) >> 1


def rng_for(master: int, *keys: int) -> np.random.Generator:
    """Random generator for the job identified by ``keys``"""
    return np.random.default_rng(np.random.SeedSequence(_entropy(master, keys)))


def replicate_seeds(master: int, replicates: int) -> list[int]:
    """Seeds for each replicate of an experiment"""
    seeds = [derive_seed(master, r) for r in range(replicates)]
    logger.debug(f"🔒 Replicate seeds from master {master}: {seeds}")
    return seeds
