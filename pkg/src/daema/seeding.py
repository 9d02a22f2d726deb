"""Derivation of independent random streams from one master seed.

Each purpose gets its own ``SeedSequence(seed, spawn_key=(stream_id, *extra))``
so that, e.g., changing the number of training steps never perturbs the
masks or the split. Stream ids are part of the reproducibility contract and
must not be renumbered.
"""

import numpy as np

STREAMS = {
    "mask": 0,
    "split": 1,
    "init": 2,
    "batches": 3,
    "forest": 4,
}


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """PCG64 generator for stream `name` (optionally sub-indexed by `extra`)."""
    key = (STREAMS[name], *extra)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))
