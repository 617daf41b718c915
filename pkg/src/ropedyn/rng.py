"""Seeded stream splitting.

Every piece of randomness in the project derives from one global seed via
child streams keyed by (seed, label, index).  A child stream depends only on
its key, never on how many other streams were drawn before it, so any subset
of trajectories/episodes/epochs can be reproduced in isolation and parallel
execution order cannot change results.
"""

from __future__ import annotations

import zlib

import numpy as np


def child_seed(root: int, label: str, index: int = 0) -> np.random.SeedSequence:
    """Derive a child seed from (root seed, stream label, index)."""
    return np.random.SeedSequence([int(root), zlib.crc32(label.encode("utf-8")), int(index)])


def child_rng(root: int, label: str, index: int = 0) -> np.random.Generator:
    """Generator for the child stream (root, label, index)."""
    return np.random.default_rng(child_seed(root, label, index))
