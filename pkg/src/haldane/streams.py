"""Deterministic random streams for reproducible (and parallel) Monte Carlo.

Every stream is a Philox counter-based generator whose 128-bit key is
assembled from a user seed and a stream index.  Stream (seed, i) is the
same no matter which worker draws from it, in which order, or how the
trial range was chunked, so parallel aggregates are bit-identical to
serial ones.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for trial `index` of an experiment keyed by `seed`.

    The Philox key packs the seed in the high 64 bits and the trial
    index in the low 64 bits; distinct (seed, index) pairs never share
    a key.
    """
    key = ((seed & _MASK64) << 64) | (index & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def make_rng(seed: int) -> np.random.Generator:
    """Single ad-hoc stream (stream index 0 of `seed`)."""
    return trial_rng(seed, 0)


class TrialStreams:
    """Reusable source of the same streams `trial_rng` hands out.

    Constructing a Philox generator per trial costs ~16us; re-keying one
    bit generator to the fresh (seed, index) state costs ~2us and yields
    bit-identical draws.  `stream(i)` invalidates the generator returned
    by any earlier call, so consume streams one at a time.
    """

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._bitgen = np.random.Philox(key=0)
        self._gen = np.random.Generator(self._bitgen)
        self._state = self._bitgen.state
        self._counter = self._state["state"]["counter"]
        self._key = self._state["state"]["key"]
        self._buffer = self._state["buffer"]

    def stream(self, index: int) -> np.random.Generator:
        self._counter[:] = 0
        self._key[0] = index & _MASK64
        self._key[1] = self._seed
        self._buffer[:] = 0
        self._state["buffer_pos"] = 4
        self._state["has_uint32"] = 0
        self._state["uinteger"] = 0
        self._bitgen.state = self._state
        return self._gen
