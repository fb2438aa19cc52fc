"""Deterministic random-number streams.

Every stochastic routine in the package draws from an :class:`RngStream`:
a (seed, stream id) pair mapped to a PCG64 generator through NumPy's
``SeedSequence`` spawn-key mechanism. The same pair always reproduces the
same draw sequence bitwise; distinct stream ids give streams that are
independent by construction, so chains and simulation replicates can run
concurrently without sharing state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK63 = (1 << 63) - 1


@dataclass(frozen=True)
class RngStream:
    """Handle for one reproducible random stream.

    ``seed`` identifies the experiment, ``stream`` the substream within it
    (one per chain, per simulation replicate, ...). The handle is immutable;
    call :meth:`generator` to obtain a fresh generator positioned at the
    start of the stream.
    """

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if int(self.stream) < 0:
            raise ValueError("stream id must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))

    def split(self, *parts: int | str) -> "RngStream":
        """Derive a child stream with the same seed and a hashed stream id.

        The id is a stable (platform-independent) hash of the parent id and
        the given parts, e.g. ``stream.split("replicate", 17)``.
        """
        h = hashlib.blake2b(digest_size=8)
        h.update(str(int(self.stream)).encode())
        for part in parts:
            h.update(b"/")
            h.update(str(part).encode())
        return RngStream(self.seed, int.from_bytes(h.digest(), "big") & _MASK63)
