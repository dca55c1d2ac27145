"""Labeled random substreams derived from a single master seed.

Every experiment takes one 64-bit master seed.  Components derive their own
independent generator from (seed, label), so adding or reordering components
never perturbs the draws of another one.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "substream_seed"]


def _label_words(label: str) -> tuple[int, ...]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def substream(seed: int, label: str) -> np.random.Generator:
    """Generator for the substream named ``label`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_label_words(label))
    return np.random.default_rng(ss)


def substream_seed(seed: int, label: str) -> int:
    """A derived integer seed, for interfaces that take a plain seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_label_words(label))
    return int(ss.generate_state(1, np.uint64)[0])
