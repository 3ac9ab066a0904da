"""Keyed, counter-style RNG derivation.

Every random draw in monokit flows from one 64-bit seed plus a tuple of
string/int keys (e.g. ``(seed, "mol", frame_id, window_index)``).  Each key
tuple gets its own independent generator, so results do not depend on call
order, worker count, or which frames were processed before.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_rng(seed: int, *keys: object) -> np.random.Generator:
    """Return a fresh Generator for (seed, *keys).

    The key material is hashed with BLAKE2b, so streams for different keys
    are statistically independent and stable across platforms and runs.
    """
    material = "\x1f".join([str(int(seed)), *[str(k) for k in keys]])
    digest = hashlib.blake2b(material.encode("utf-8"), digest_size=16).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))
