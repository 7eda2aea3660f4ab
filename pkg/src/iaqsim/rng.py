"""Label-addressable random streams.

Every stochastic draw in a run comes from a stream keyed by
``(master_seed, purpose, entity)``.  Keys are hashed with BLAKE2b into a
``SeedSequence`` spawn key and fed to numpy's counter-based Philox generator,
so a stream depends only on its key, never on how many other streams exist or
in which order they were created.

Golden logs are pinned to this derivation (``STREAM_VERSION``); changing the
hashing or the bit generator invalidates them.
"""

from __future__ import annotations

import hashlib

import numpy as np

STREAM_VERSION = "philox-blake2b-v1"


def _label_words(purpose: str, entity: str) -> tuple[int, ...]:
    digest = hashlib.blake2b(
        f"{STREAM_VERSION}\x00{purpose}\x00{entity}".encode(), digest_size=16
    ).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def seed_stream(master_seed: int, purpose: str, entity: str | int = "") -> np.random.Generator:
    """Return the independent generator for ``(master_seed, purpose, entity)``."""
    if master_seed < 0 or master_seed >= 2**64:
        raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {master_seed}")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=_label_words(purpose, str(entity)))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, purpose: str, entity: str | int = "") -> int:
    """A 63-bit integer seed derived from a labelled stream (used for sweep replicas)."""
    return int(seed_stream(master_seed, purpose, entity).integers(0, 2**63 - 1))
