"""Seeded random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``.
Independent substreams are derived from a master seed with
``SeedSequence(seed, spawn_key=(stream_id,))``; replica ``i`` of a
replicated experiment uses ``stream_id = i``. Vectorised batch routines
work on fixed-size blocks of replicas and use the block index as the
stream id, so results do not depend on how work is split across workers.
"""

from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 20240601
BLOCK_SIZE = 50_000


def substream(seed: int, stream_id: int) -> np.random.Generator:
    """Generator for substream ``stream_id`` of master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.default_rng(ss)


def name_stream_id(name: str) -> int:
    """Stable stream id for a named test (CRC32 of the UTF-8 name)."""
    return zlib.crc32(name.encode("utf-8"))


def named_stream(seed: int, name: str) -> np.random.Generator:
    return substream(seed, name_stream_id(name))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def block_sizes(total: int, block: int = BLOCK_SIZE):
    """Yield ``(block_index, size)`` pairs covering ``total`` replicas."""
    i = 0
    done = 0
    while done < total:
        size = min(block, total - done)
        yield i, size
        done += size
        i += 1


def child_generators(rng: np.random.Generator, total: int, block: int = BLOCK_SIZE):
    """Yield ``(size, generator)`` per block, spawned deterministically from ``rng``.

    The block generators are children of ``rng``'s bit generator seed
    sequence, so the block layout alone determines the draws.
    """
    blocks = list(block_sizes(total, block))
    seeds = rng.bit_generator.seed_seq.spawn(len(blocks)) if blocks else []
    for (_, size), ss in zip(blocks, seeds):
        yield size, np.random.default_rng(ss)
