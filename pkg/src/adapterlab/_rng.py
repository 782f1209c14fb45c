"""Purpose-derived random streams.

All randomness flows from one user seed through ``numpy.random.PCG64``; each
consumer (data shuffle, dropout, masking, sampling, ...) gets an independent
stream keyed by a purpose string, so adding a consumer never perturbs another.
"""

import zlib

import numpy as np


def purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def derive_rng(seed: int, purpose: str, *extra: int) -> np.random.Generator:
    entropy = [int(seed) % 2**64, purpose_key(purpose), *(int(e) % 2**64 for e in extra)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
