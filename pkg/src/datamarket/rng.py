"""Named, seeded random streams.

Every consumer of randomness asks for a stream by name (plus integer keys
such as agent number and step).  Streams are derived from the run seed with
``SeedSequence`` so a run is a pure function of its seed no matter which
order the streams are created in.
"""

from __future__ import annotations

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class RngStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._sequential: dict[str, np.random.Generator] = {}

    def fresh(self, name: str, *keys: int) -> np.random.Generator:
        """A new generator for ``(name, *keys)``; same arguments give the same draws."""
        s = self.seed % (1 << 64)
        entropy = [s & 0xFFFFFFFF, s >> 32, _name_key(name)]
        entropy.extend(int(k) for k in keys)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def lazy(self, name: str, *keys: int) -> "LazyGenerator":
        """Like :meth:`fresh`, but built on first use (most policy calls never draw)."""
        return LazyGenerator(lambda: self.fresh(name, *keys))

    def stream(self, name: str) -> np.random.Generator:
        """A long-lived generator that advances as it is consumed."""
        if name not in self._sequential:
            self._sequential[name] = self.fresh(name)
        return self._sequential[name]


class LazyGenerator:
    __slots__ = ("_make", "_gen")

    def __init__(self, make):
        self._make = make
        self._gen = None

    def __getattr__(self, attr):
        if self._gen is None:
            self._gen = self._make()
        return getattr(self._gen, attr)


def agent_number(agent_id: str) -> int:
    return int(agent_id[1:])
