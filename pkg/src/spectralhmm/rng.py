"""Seed derivation and generator construction.

All randomness in the package flows through :func:`make_rng`, which wraps
NumPy's PCG64 bit generator.  Child seeds are derived by hashing
``(parent seed, purpose tag, index...)`` with BLAKE2b so that the stream
used by any one task does not depend on how many other tasks ran before it.
"""

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(seed, tag, *index):
    """Return a 64-bit child seed for ``(seed, tag, *index)``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & SEED_MASK).encode())
    h.update(b"\x1f")
    h.update(str(tag).encode())
    for part in index:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))
