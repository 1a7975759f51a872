"""Named random streams derived from a single 64-bit seed."""

import zlib

import numpy as np

STREAMS = ("chop", "init", "shuffle", "datagen")


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Return an independent generator for ``name``.

    Each stream is keyed on the name's CRC32, so adding a consumer never
    shifts the draws seen by another one.
    """
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))
