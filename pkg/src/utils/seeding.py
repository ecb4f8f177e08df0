"""
Seeding - Deterministic child seeds for independent jobs
"""

import numpy as np


def derive_seed(master: int, *keys: int) -> int:
    """
    Stable 63-bit seed for the job identified by keys under a master seed.

    The same (master, keys) always gives the same value, whatever order jobs
    are scheduled in.
    """
    entropy = [int(master)] + [int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
