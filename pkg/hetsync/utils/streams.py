""" Counter-based random streams.

Every stream is a Philox generator keyed by a tuple of integers, so a value
depends only on its key and never on how many draws happened elsewhere.
"""

import numpy as np

_MASK = 2**64 - 1


def philox(*keys: int) -> np.random.Generator:
    """Return a Philox generator keyed on `keys` (seed first, then stream ids)."""
    entropy = [int(k) & _MASK for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
