"""Seeded random streams.

All randomness in the toolkit flows through Philox (counter-based, identical
across platforms) keyed by ``(seed, stream tag, extra words)`` so every
consumer gets an independent, reproducible stream. The algorithm name is
recorded in run manifests.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "philox"

# stream tags
SPLIT = 1
AE_INIT = 2
MODEL_INIT = 3
BATCHES = 4
SUBSAMPLE = 5


def stream(seed: int, tag: int, *extra: int) -> np.random.Generator:
    """Independent generator for ``(seed, tag, *extra)``."""
    seq = np.random.SeedSequence(entropy=(int(seed), int(tag), *(int(e) for e in extra)))
    return np.random.Generator(np.random.Philox(seq))
