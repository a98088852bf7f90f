"""Named deterministic random substreams.

All randomness in a run flows from one global seed; each consumer derives
its own stream from (seed, name...) so results do not depend on scheduling
or evaluation order. Streams are PCG64 generators, so the same derivation
always yields an identical sequence.
"""

import hashlib

import numpy as np


def substream_seed(root_seed: int, *names) -> int:
    """Derive a 64-bit child seed from a root seed and a name path."""
    payload = str(int(root_seed)).encode()
    for name in names:
        payload += b"\x1f" + str(name).encode()
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root_seed: int, *names) -> np.random.Generator:
    """Independent generator for the (seed, name...) derivation."""
    return np.random.Generator(np.random.PCG64(substream_seed(root_seed, *names)))
