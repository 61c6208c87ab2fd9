"""Hard instance families for stress-testing the learner.

Two families of (p, q) pairs with closed-form advice error, built on random
subset codes with a guaranteed minimum pairwise symmetric difference:

* unbalanced: p is 2*eps/d on a hidden subset S and eps/d elsewhere, with
  flat advice q = eps/d everywhere, so ||p - q||_1 = |S|*eps/d exactly and
  every marginal is tiny;
* balanced: p is 1/2 + lam/k on a hidden k-subset and 1/2 elsewhere, with
  advice q = 1/2 everywhere, so ||p - q||_1 = lam exactly and the pair stays
  1/4-balanced.

Distinct hidden subsets S, T from one code give mean vectors at l2 distance
(lam/k)*sqrt(|S xor T|), which the generators expose for packing-style
experiments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import make_rng

__all__ = ["SubsetCode", "gv_code", "unbalanced_instance", "balanced_instance"]


@dataclass(frozen=True, slots=True)
class SubsetCode:
    """M subsets of range(d), all of one size, pairwise far in symmetric difference."""

    sets: tuple[frozenset[int], ...]
    subset_size: int
    min_symdiff: int

    def __post_init__(self) -> None:
        for s in self.sets:
            if len(s) != self.subset_size:
                raise ValueError(
                    f"every set must have exactly {self.subset_size} elements, got {len(s)}"
                )
        for i in range(len(self.sets)):
            for j in range(i + 1, len(self.sets)):
                sd = len(self.sets[i] ^ self.sets[j])
                if sd < self.min_symdiff:
                    raise ValueError(
                        f"sets {i} and {j} have symmetric difference {sd} < {self.min_symdiff}"
                    )


def gv_code(
    d: int, k: int, min_symdiff: int, M: int, seed: int, max_attempts: int = 10_000
) -> SubsetCode:
    """Random code of M k-subsets with pairwise symmetric difference >= min_symdiff.

    Rejection sampling: draw uniform k-subsets and keep those far from all
    kept sets.  Gives up after max_attempts consecutive rejections, reporting
    how many sets were achieved so the caller can lower M.
    """
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    if min_symdiff > 2 * k:
        raise ValueError(
            f"min_symdiff {min_symdiff} is impossible: two {k}-sets differ in at most {2 * k} elements"
        )
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    rng = make_rng(seed)
    kept: list[frozenset[int]] = []
    misses = 0
    while len(kept) < M:
        cand = frozenset(int(x) for x in rng.choice(d, size=k, replace=False))
        if all(len(cand ^ s) >= min_symdiff for s in kept):
            kept.append(cand)
            misses = 0
        else:
            misses += 1
            if misses >= max_attempts:
                raise RuntimeError(
                    f"code construction stalled after {max_attempts} consecutive "
                    f"rejections with {len(kept)} of {M} sets; lower M or min_symdiff"
                )
    return SubsetCode(sets=tuple(kept), subset_size=k, min_symdiff=min_symdiff)


def _subset_mask(d: int, S) -> np.ndarray:
    idx = np.fromiter((int(i) for i in S), dtype=np.int64, count=len(S))
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise ValueError(f"subset contains indices outside range({d})")
    mask = np.zeros(d, dtype=bool)
    mask[idx] = True
    return mask


def unbalanced_instance(d: int, epsilon: float, S) -> tuple[np.ndarray, np.ndarray]:
    """Sparse-advice-error pair with near-degenerate marginals.

    p = 2*eps/d on S, eps/d off S; q = eps/d everywhere.  ||p - q||_1 is
    exactly |S|*eps/d.
    """
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    if d < 10:
        raise ValueError(f"d must be at least 10, got {d}")
    mask = _subset_mask(d, S)
    base = epsilon / d
    q = np.full(d, base)
    p = np.where(mask, 2.0 * base, base)
    return p, q


def balanced_instance(
    d: int, epsilon: float, lam: float, S
) -> tuple[np.ndarray, np.ndarray, int]:
    """Balanced pair at l1 distance exactly lam, spread over k = ceil(lam^2/eps^2) coords.

    p = 1/2 + lam/k on S, 1/2 off S; q = 1/2 everywhere.  Distinct subsets S,
    T of one code give ||p_S - p_T||_2 = (lam/k)*sqrt(|S xor T|).  Requires
    lam >= 100*eps (the regime where the family is hard) and a bump lam/k
    below 1/4 so the pair stays 1/4-balanced.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if lam < 100.0 * epsilon:
        raise ValueError(f"need lam >= 100*epsilon, got lam={lam}, epsilon={epsilon}")
    k = math.ceil(lam * lam / (epsilon * epsilon))
    if len(S) != k:
        raise ValueError(f"subset must have exactly k = {k} elements, got {len(S)}")
    if k > d:
        raise ValueError(f"k = {k} exceeds d = {d}")
    bump = lam / k
    if not bump < 0.25:
        raise ValueError(f"bump lam/k = {bump} must be below 1/4 for balancedness")
    mask = _subset_mask(d, S)
    q = np.full(d, 0.5)
    p = np.where(mask, 0.5 + bump, 0.5)
    return p, q, k
