"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
``(root seed, stream, *indices)``.  Disorder, basis choice, shot noise and
readout calibration live on separate streams, so changing the measurement
budget never changes the prepared states.
"""

from __future__ import annotations

import numpy as np

DISORDER = 0
BASIS = 1
SHOTS = 2
CALIBRATION = 3
HAAR = 4


def seed_sequence(seed: int, stream: int, *index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(stream), *map(int, index)))


def generator(seed: int, stream: int, *index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_sequence(seed, stream, *index)))


def derive_seed64(seed: int, stream: int, *index: int) -> int:
    """A 64-bit seed for one sub-stream, small enough to persist per record."""
    return int(seed_sequence(seed, stream, *index).generate_state(1, np.uint64)[0])


def from_seed64(seed64: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed64))))
