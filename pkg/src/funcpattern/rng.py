"""Seeded, counter-based random streams.

Every random draw in the package comes from a stream identified by a user seed plus integer keys (a purpose tag
and a replicate index, for instance). Streams are Philox generators seeded through a `SeedSequence`, so stream
``(seed, PERMUTATION, r)`` yields the same numbers whatever order replicates are processed in.
"""

import numpy as np

PERMUTATION = 1
NOISE = 2
SPLIT = 3
TRAINING = 4
FIXTURE = 5
HOLDOUT = 6


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for stream ``(seed, *keys)``.

    Args:
        seed: Non-negative user seed.
        *keys: Non-negative integers naming the stream.

    Example:
        >>> a = stream(7, PERMUTATION, 3).random()
        >>> b = stream(7, PERMUTATION, 3).random()
        >>> a == b
        True
        >>> a == stream(7, PERMUTATION, 4).random()
        False
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def derive_seed(seed: int, *keys: int) -> int:
    """Return a 63-bit seed drawn from stream ``(seed, *keys)``, for handing to a nested seeded routine."""
    return int(stream(seed, *keys).integers(0, 2**63 - 1))
