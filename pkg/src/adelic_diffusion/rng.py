"""Counter-based random streams keyed by (seed, stream path).

Streams are values: the same (seed, path) always yields the same draws, no
matter how work is scheduled across workers.  Philox is counter-based, so
child streams derived through SeedSequence spawn keys are independent and
reproducible without any shared state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """Immutable handle for a reproducible random stream."""

    seed: int
    path: tuple[int, ...] = field(default=())

    def child(self, *indices: int) -> "RngStream":
        """Derive a sub-stream; children with distinct indices are independent."""
        return RngStream(self.seed, self.path + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot interpret {type(rng).__name__} as a random stream")
