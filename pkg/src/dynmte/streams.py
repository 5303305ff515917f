"""Deterministic counter-based random streams.

Every stochastic operation in the package consumes a RandomStream, a pure
value (seed, stream_id). Distinct stream_ids under one seed yield
statistically independent generators, so parallel replicates can be assigned
streams by index and aggregated in index order, making results independent
of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RandomStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator; repeated calls restart the same sequence."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, offset: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id + offset)


def substream(seed: int, stream_id: int) -> RandomStream:
    """The (seed, stream_id) stream. Pure: no global state involved."""
    return RandomStream(int(seed), int(stream_id))
