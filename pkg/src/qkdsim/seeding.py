"""Deterministic seed derivation.

All randomness in a run flows from one master seed. Sub-streams (the
session itself, the attacker, per-trial seeds) are derived by hashing the
master seed together with a label path, so adding a consumer never shifts
the bits another consumer sees and batches parallelize without any shared
generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_bytes(master_seed: int, *labels: str, n: int = 16) -> bytes:
    material = "|".join([str(int(master_seed)), *labels]).encode()
    return hashlib.sha256(material).digest()[:n]


def make_rng(master_seed: int, *labels: str) -> np.random.Generator:
    seed = int.from_bytes(derive_bytes(master_seed, *labels), "big")
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Per-trial seed: hash of (master seed, trial index), truncated to 64 bits."""
    return int.from_bytes(derive_bytes(master_seed, "trial", str(trial_index), n=8), "big")
