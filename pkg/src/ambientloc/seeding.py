"""Stable seed derivation: every random stream is keyed by (seed, names...)."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *names) -> int:
    h = hashlib.sha256(str(int(seed)).encode())
    for n in names:
        h.update(b"\x00" + str(n).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(seed: int, *names) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *names))
