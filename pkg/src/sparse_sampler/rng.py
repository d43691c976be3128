"""Keyed random streams.

Every random quantity in an experiment (grid, sample draws, noise) comes from
its own stream, identified by ``(seed, tag, *indices)``.  Streams are backed by
the counter-based Philox bit generator, so distinct keys are independent and
trials can be generated in any order without changing results.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StreamId:
    seed: int
    tag: str
    index: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        key = (zlib.crc32(self.tag.encode()),) + tuple(int(i) for i in self.index)
        ss = np.random.SeedSequence(int(self.seed), spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *index: int) -> "StreamId":
        return StreamId(self.seed, self.tag, self.index + tuple(index))

    def __str__(self) -> str:
        base = f"{self.seed}:{self.tag}"
        return base + ":" + ",".join(map(str, self.index)) if self.index else base


def stream(seed: int, tag: str, *index: int) -> np.random.Generator:
    """Shorthand for ``StreamId(seed, tag, index).generator()``."""
    return StreamId(seed, tag, tuple(index)).generator()


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, StreamId):
        return rng.generator()
    return np.random.default_rng(rng)
