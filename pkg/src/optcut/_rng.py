"""Deterministic random-stream derivation.

Every stochastic component draws from a counter-based generator keyed by
(seed, integer path).  Streams depend only on their path, never on
scheduling, so serial and parallel executions of the same work produce
identical numbers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for one addressable unit of work.

    Parameters
    ----------
    seed : int
        User-facing base seed.
    *path : int
        Position of the work unit, e.g. ``(rep,)`` for an outer bootstrap
        repetition or ``(rep, slot)`` for a nested resample inside it.
        Distinct paths yield statistically independent streams.
    """
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(seq))
