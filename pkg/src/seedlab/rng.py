"""Counter-based random substreams keyed by (base seed, trial, iteration, purpose).

Every seeding iteration draws from its own substream, so the draws of one
iteration never depend on how many numbers earlier iterations consumed. That is
what makes ``greedy(ell=1)`` replay ``kmeans++`` exactly and lets different
variants be compared on common random numbers.
"""

from __future__ import annotations

import numpy as np

SAMPLE = 0
ADVERSARY = 1
MIXING = 2

_MASK64 = (1 << 64) - 1


class SeedStreams:
    """Substream factory for one trial.

    ``stream()`` repositions a single Philox generator at the start of the
    requested counter block. The returned generator is only valid until the next
    ``stream()`` call on the same object.
    """

    def __init__(self, base_seed: int = 0, trial: int = 0, _shared: "SeedStreams | None" = None):
        if base_seed < 0 or trial < 0:
            raise ValueError("seed and trial must be nonnegative")
        self.base_seed = int(base_seed)
        self.trial = int(trial)
        if _shared is not None:
            self._key, self._bitgen, self._gen = _shared._key, _shared._bitgen, _shared._gen
            self._state = _shared._state
            return
        self._key = np.array([self.base_seed & _MASK64, (self.base_seed >> 64) & _MASK64], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=self._key)
        self._gen = np.random.Generator(self._bitgen)
        self._state = {
            "bit_generator": "Philox",
            "state": {"counter": np.zeros(4, dtype=np.uint64), "key": self._key},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }

    def stream(self, iteration: int, purpose: int = SAMPLE) -> np.random.Generator:
        # counter word 0 advances with each draw; words 1..3 address the substream
        state = self._state
        state["state"]["counter"][1:] = (purpose, iteration, self.trial)
        self._bitgen.state = state
        return self._gen

    def for_trial(self, trial: int) -> "SeedStreams":
        """Streams for another trial; shares this object's generator (same validity rule)."""
        return SeedStreams(self.base_seed, trial, _shared=self)

    def __repr__(self):
        return f"SeedStreams(base_seed={self.base_seed}, trial={self.trial})"


def as_streams(rng) -> SeedStreams:
    """Accept a :class:`SeedStreams`, an integer seed or ``None`` (seed 0)."""
    if isinstance(rng, SeedStreams):
        return rng
    if rng is None:
        return SeedStreams(0)
    if isinstance(rng, (int, np.integer)):
        return SeedStreams(int(rng))
    raise TypeError("rng must be a SeedStreams instance or an integer seed")


def trial_generator(base_seed: int, chunk: int, purpose: int = 0) -> np.random.Generator:
    """Independent generator for vectorized batches of trials."""
    return np.random.default_rng([int(base_seed), int(chunk), int(purpose), 0xB47C])
