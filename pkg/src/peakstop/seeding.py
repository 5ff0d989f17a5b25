"""Root-seed to substream mapping.

Every stochastic task derives its generators from one 64-bit root seed via
named spawn keys, so results are bit-identical regardless of worker count
or chunking, and every substream can be replayed in isolation.
"""

from __future__ import annotations

import numpy as np

STREAM_PATHS = 0     # per-path streams for the exact-epoch simulator
STREAM_RULES = 1     # per-rule randomization (thresholds etc.)
STREAM_BRIDGE = 2    # Brownian-bridge maximum refinement draws
STREAM_SKELETON = 3  # chunked grid-skeleton batches


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
