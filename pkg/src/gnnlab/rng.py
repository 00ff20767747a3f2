"""Deterministic random streams.

All randomness in the package flows from a single master seed through
named, purpose-split streams backed by the Philox counter-based bit
generator. A stream is addressed by the master seed plus a path of tags
(strings or integers), e.g. ``stream(seed, "weights", draw_index)``.
Distinct paths yield statistically independent streams; the same path
always reproduces the same bits, so experiments are replayable and
ensemble members can be generated in any order or in parallel.
"""

from __future__ import annotations

import hashlib

import numpy as np

_WORD = 0xFFFFFFFFFFFFFFFF


def _tag_words(tag: str | int) -> list[int]:
    if isinstance(tag, (int, np.integer)):
        return [int(tag) & _WORD, (int(tag) >> 64) & _WORD]
    digest = hashlib.blake2s(str(tag).encode("utf-8"), digest_size=16).digest()
    return [int.from_bytes(digest[:8], "little"), int.from_bytes(digest[8:], "little")]


def stream(master_seed: int, *path: str | int) -> np.random.Generator:
    """Return the Philox generator for ``(master_seed, *path)``."""
    words = [int(master_seed) & _WORD]
    for tag in path:
        words.extend(_tag_words(tag))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def spawn_seeds(master_seed: int, purpose: str, count: int) -> list[int]:
    """Derive ``count`` child seeds for independent jobs under one purpose."""
    gen = stream(master_seed, "spawn", purpose)
    return [int(s) for s in gen.integers(0, 2**63 - 1, size=count)]
