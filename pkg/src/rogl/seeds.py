"""Deterministic named substreams from one 64-bit master seed."""
from __future__ import annotations

import hashlib

import numpy as np


def substream_seed(master: int, name: str) -> int:
    """Stable 64-bit child seed for a named substream of the master seed."""
    digest = hashlib.sha256(f"{int(master)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def substream(master: int, name: str) -> np.random.Generator:
    return np.random.default_rng(substream_seed(master, name))
