"""Seed derivation shared by every stochastic component.

All randomness flows from a master integer seed through ``SeedSequence``
spawn keys, so a unit of work (sample ``i``, candidate ``j``, tower ``k``)
gets the same stream whether it runs serially or in a worker pool.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"seed keys must be non-negative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))


def derive_seed(seed: int, *keys) -> int:
    """Child seed for the unit of work identified by ``keys``."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, *keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))
