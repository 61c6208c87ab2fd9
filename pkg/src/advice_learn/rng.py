"""Deterministic seed derivation for nested experiment scopes.

Every random operation in this package draws from a generator keyed by a root
seed plus an integer path, e.g. ``make_rng(seed, trial, op)``.  Distinct paths
give statistically independent streams, the same path always reproduces the
same stream, and streams can be handed to parallel workers without
coordination.  The conventional tree is::

    experiment seed -> trial index -> operation index [-> sub-operation ...]
"""
from __future__ import annotations

import numpy as np

__all__ = ["spawn_seed", "make_rng"]


def spawn_seed(seed: int, *path: int) -> np.random.SeedSequence:
    """Derive the child SeedSequence at ``path`` under ``seed``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence([seed, *(int(p) for p in path)])


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for one operation; distinct paths are independent streams."""
    return np.random.default_rng(spawn_seed(seed, *path))
