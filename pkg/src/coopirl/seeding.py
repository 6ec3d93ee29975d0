"""Named random streams derived from a single run seed."""
from __future__ import annotations

import numpy as np

STREAMS = {"environment": 0, "follower": 1, "proposal": 2, "objective": 3}


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for component ``name``; same seed and name give the same stream."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],)))
