"""Seed derivation. One base seed feeds every random stream in a run; sub-seeds come
from SplitMix64 folded over (base, purpose tag bytes, index) and each stream is a
counter-based Philox generator keyed by its sub-seed. Any implementation of SplitMix64
and Philox4x64 reproduces the same streams."""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    z = (state + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, tag: str, index: int = 0) -> int:
    """Derive a 64-bit sub-seed for one purpose and one item.

    Args:
        base (int): the run's base seed.
        tag (str): purpose tag, e.g. "attack" or "defend-clean".
        index (int): item index within the purpose (image index, sweep row).

    Returns:
        int: an unsigned 64-bit seed.
    """
    state = splitmix64(int(base) & MASK64)
    for byte in tag.encode("utf-8"):
        state = splitmix64(state ^ byte)
    return splitmix64(state ^ (int(index) & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


def derived_rng(base: int, tag: str, index: int = 0) -> np.random.Generator:
    return make_rng(derive_seed(base, tag, index))
