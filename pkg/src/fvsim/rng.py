"""Deterministic random number streams.

Every sampler in this package is a pure function of its parameters and an
RngStream value.  A stream is identified by a (seed, stream_id) pair; equal
pairs always reproduce the same variate sequence, and distinct stream ids
give statistically independent streams, which is how replicas are
parallelized without losing bit-reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(ss)

    def substream(self, index: int) -> np.random.Generator:
        """Generator for an independent child stream (replica/chunk index)."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, index))
        return np.random.default_rng(ss)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream or an already-built Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()
