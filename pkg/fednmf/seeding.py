"""
Deterministic RNG Stream Derivation

Every random draw in a run comes from a stream derived from the master seed
plus a purpose string and integer coordinates (client id, round). Streams are
derived, never shared, so results do not depend on execution order or on
how many worker threads run client updates.
"""

import hashlib
from typing import Tuple

import numpy as np


def purpose_tag(purpose: str) -> int:
    """
    Stable 32-bit tag for a purpose string.

    Args:
        purpose: Stream name, e.g. "client-update" or "partition"

    Returns:
        First 4 bytes of SHA3-256(purpose) as an unsigned integer
    """
    return int.from_bytes(hashlib.sha3_256(purpose.encode("utf-8")).digest()[:4], "big")


def derive_seed_sequence(master_seed: int, purpose: str, *coords: int) -> np.random.SeedSequence:
    if master_seed < 0:
        raise ValueError(f"master_seed must be >= 0, got {master_seed}")
    if any(c < 0 for c in coords):
        raise ValueError(f"stream coordinates must be >= 0, got {coords}")
    spawn_key: Tuple[int, ...] = (purpose_tag(purpose),) + tuple(int(c) for c in coords)
    return np.random.SeedSequence(entropy=master_seed, spawn_key=spawn_key)


def derive_rng(master_seed: int, purpose: str, *coords: int) -> np.random.Generator:
    """
    Independent Generator for (master_seed, purpose, *coords).

    Example:
        derive_rng(7, "client-update", client_id, round) always yields the same
        stream, whichever thread or process asks for it.
    """
    return np.random.default_rng(derive_seed_sequence(master_seed, purpose, *coords))
