"""Seeded random streams.

Every simulation draws from several independent ``random.Random`` streams,
one per purpose, all derived from a single master seed.  Keeping purposes on
separate streams means that, for example, switching elasticity on does not
shift the task-time draws, so runs with equal seeds stay paired across
policies and group sizes.
"""

from __future__ import annotations

import random

# Purpose salts XOR-ed into the master seed.
TASK_TIME = 0x5EED_7A5C_0000_0001
REPLICA_PICK = 0x5EED_7A5C_0000_0002
REPLICA_SHUFFLE = 0x5EED_7A5C_0000_0003
AVAILABILITY = 0x5EED_7A5C_0000_0004

_MASK64 = (1 << 64) - 1


def stream(seed: int, purpose: int, index: int = 0) -> random.Random:
    """Return the stream for ``purpose`` (optionally sub-indexed, e.g. per worker)."""
    base = (seed & _MASK64) ^ purpose
    return random.Random(base + (index << 64))


def unit_open_left(rng: random.Random) -> float:
    """Uniform draw on (0, 1]."""
    return 1.0 - rng.random()
