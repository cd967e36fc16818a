"""Named random substreams derived from a single root seed."""
import zlib

import numpy as np


def stream_key(name):
    return zlib.crc32(name.encode("ascii"))


def substream(seed, name, *keys):
    """Independent generator for ``(seed, name, *keys)``.

    The same arguments always give the same stream, and streams with different
    names or keys do not overlap.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name), *map(int, keys)))
    return np.random.Generator(np.random.PCG64(ss))


def hashed_unit(seed, name, *keys):
    """A reproducible float in [0, 1) from hashing the keys."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name), *map(int, keys)))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) / 2.0**64
