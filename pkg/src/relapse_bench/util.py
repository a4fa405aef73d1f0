"""Deterministic RNG fan-out shared by every module.

All randomness in a run flows from a single root seed.  Sub-streams are
derived from (root, *components) where components are small ints or strings
(fold index, seed index, patient id, epoch, ...).  Serial and parallel runs
therefore agree bit for bit.
"""

import hashlib

import numpy as np


def _component_to_int(c) -> int:
    if isinstance(c, (int, np.integer)):
        return int(c) & 0xFFFFFFFF
    digest = hashlib.sha256(str(c).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def derive_rng(*components) -> np.random.Generator:
    """Generator for the sub-stream named by `components`."""
    entropy = [_component_to_int(c) for c in components]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(*components) -> int:
    """Stable 32-bit seed for the sub-stream named by `components`."""
    entropy = [_component_to_int(c) for c in components]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
