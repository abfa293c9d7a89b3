"""Seed derivation.

Every random stream in the package is keyed by ``(seed, *path)`` through
:class:`numpy.random.SeedSequence` spawn keys, so the numbers a work unit sees
never depend on which worker (or in what order) it runs.
"""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def stream(seed, *path):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.default_rng(ss)


def derive_seed(seed, *path):
    """Deterministic 63-bit child seed of ``seed`` along ``path``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
