"""Counter-based random streams.

Every consumer of randomness asks for a stream by a tuple of integer tags
(replica, birth id, branch, ...). Streams are Philox generators keyed by a
SeedSequence, so the same tags always give the same numbers regardless of
the order in which streams are requested. This is what makes evolution logs
replayable and lets one birth site be inserted without disturbing the
randomness of any other particle.
"""

import zlib

import numpy as np

# symbolic tags for the different consumers of a run seed
SITES = 1
PARTICLE = 2
CHAIN = 3
WALK = 4
FREE = 5
PERFECT = 6
STATS = 7


def _tag(t):
    if isinstance(t, str):
        return zlib.crc32(t.encode())
    return int(t)


def stream(seed, *tags):
    """Independent generator for ``(seed, *tags)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_tag(t) for t in tags))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(rng):
    """Draw a 63-bit seed from ``rng`` for keying further streams."""
    return int(rng.integers(0, 2**63 - 1))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
