"""Divergences between product distributions on the Boolean hypercube.

Everything here takes mean vectors, since a product distribution is determined
by its marginals.  ``tv_exact`` enumerates the cube (d <= 24) and is the
ground-truth oracle for small-dimension verification; ``tv_bounds`` gives the
two-sided total-variation bounds in terms of the l2 distance that hold for
tau-balanced vectors, and ``kl_bounds`` the corresponding KL sandwich.
Infinite KL is reported as ``math.inf`` rather than raised, so reports
serialize cleanly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import as_mean_array, check_balanced

__all__ = [
    "kl_bernoulli",
    "kl_product",
    "l1_distance",
    "l2_distance",
    "tv_exact",
    "tv_bounds",
    "kl_bounds",
    "DivergenceReport",
    "divergence_report",
    "TV_ENUM_MAX_DIM",
    "TV_LOWER_C0",
]

# Enumeration budget: 2^24 joint outcomes is the largest sweep under ~1 s.
TV_ENUM_MAX_DIM = 24

# Constant in the TV lower bound c0 * min(1, l2).  The tight constant for
# balanced product distributions is not pinned beyond being below 0.2; 0.1 is
# safe at the dimensions we enumerate, treat it as heuristic elsewhere.
TV_LOWER_C0 = 0.1


def kl_bernoulli(a: float, b: float) -> float:
    """KL divergence between Bernoulli(a) and Bernoulli(b), in nats.

    Uses the conventions 0*ln(0) = 0 and KL = inf when b is degenerate at the
    wrong atom.
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"a must be in [0, 1], got {a}")
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must be in [0, 1], got {b}")
    total = 0.0
    if a > 0.0:
        if b == 0.0:
            return math.inf
        total += a * math.log(a / b)
    if a < 1.0:
        if b == 1.0:
            return math.inf
        total += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
    return total


def kl_product(p, q) -> float:
    """KL divergence between two product distributions: sum of coordinate KLs."""
    pa = as_mean_array(p, "p")
    qa = as_mean_array(q, "q")
    if pa.size != qa.size:
        raise ValueError(f"dimension mismatch: {pa.size} vs {qa.size}")
    total = 0.0
    for a, b in zip(pa, qa):
        term = kl_bernoulli(float(a), float(b))
        if math.isinf(term):
            return math.inf
        total += term
    return total


def _paired(p, q) -> tuple[np.ndarray, np.ndarray]:
    pa = as_mean_array(p, "p")
    qa = as_mean_array(q, "q")
    if pa.size != qa.size:
        raise ValueError(f"dimension mismatch: {pa.size} vs {qa.size}")
    return pa, qa


def l1_distance(p, q) -> float:
    pa, qa = _paired(p, q)
    return float(np.abs(pa - qa).sum())


def l2_distance(p, q) -> float:
    pa, qa = _paired(p, q)
    return float(np.linalg.norm(pa - qa))


def _prob_table(p: np.ndarray) -> np.ndarray:
    """Probabilities of all 2^len(p) outcomes; bit j of the index is coord j."""
    table = np.ones(1)
    for pj in p:
        table = np.concatenate([table * (1.0 - pj), table * pj])
    return table


def tv_exact(p, q) -> float:
    """Exact total variation distance by enumerating the cube (d <= 24).

    The low 16 coordinates are tabulated once by iterative doubling; the outer
    loop walks the remaining assignments with direct prefix products, so every
    outcome probability is an exact product of at most d doubles.  Accumulated
    error stays below 1e-12 at d = 24.
    """
    pa, qa = _paired(p, q)
    d = pa.size
    if d > TV_ENUM_MAX_DIM:
        raise ValueError(
            f"tv_exact enumerates 2^d outcomes and requires d <= {TV_ENUM_MAX_DIM}, "
            f"got d = {d}; use tv_bounds instead"
        )
    b = min(d, 16)
    lo_p = _prob_table(pa[:b])
    lo_q = _prob_table(qa[:b])
    hi_p = pa[b:]
    hi_q = qa[b:]
    partials = []
    for hi in range(1 << (d - b)):
        wp = 1.0
        wq = 1.0
        for j in range(d - b):
            if (hi >> j) & 1:
                wp *= hi_p[j]
                wq *= hi_q[j]
            else:
                wp *= 1.0 - hi_p[j]
                wq *= 1.0 - hi_q[j]
        partials.append(float(np.abs(wp * lo_p - wq * lo_q).sum()))
    return 0.5 * math.fsum(partials)


def tv_bounds(p, q, tau: float, c0: float = TV_LOWER_C0) -> tuple[float, float]:
    """Two-sided TV bounds (c0*min(1, l2), min(1, l2/sqrt(tau))).

    Both vectors must be tau-balanced.  The lower bound's constant is
    heuristic (any constant below 0.2 is admissible); the upper bound is the
    balanced-case estimate and is what acceptance checks rely on.
    """
    if not 0.0 < c0 <= 0.2:
        raise ValueError(f"c0 must be in (0, 0.2], got {c0}")
    pa = check_balanced(p, tau, "p")
    qa = check_balanced(q, tau, "q")
    if pa.size != qa.size:
        raise ValueError(f"dimension mismatch: {pa.size} vs {qa.size}")
    dist = float(np.linalg.norm(pa - qa))
    return c0 * min(1.0, dist), min(1.0, dist / math.sqrt(tau))


def kl_bounds(p, q, tau: float) -> tuple[float, float]:
    """KL sandwich for tau-balanced vectors: (2*l2^2, (2/tau)*l2^2)."""
    pa = check_balanced(p, tau, "p")
    qa = check_balanced(q, tau, "q")
    if pa.size != qa.size:
        raise ValueError(f"dimension mismatch: {pa.size} vs {qa.size}")
    sq = float(np.sum((pa - qa) ** 2))
    return 2.0 * sq, (2.0 / tau) * sq


@dataclass(frozen=True, slots=True)
class DivergenceReport:
    """All divergences between one pair of mean vectors.

    ``tv_exact`` is present only when the dimension admits enumeration;
    ``tv_lower``/``tv_upper`` always bracket it (lower heuristically).
    """

    tv_exact: float | None
    tv_lower: float
    tv_upper: float
    kl: float
    l1: float
    l2: float
    tau_used: float


def divergence_report(p, q, tau: float) -> DivergenceReport:
    """Compute every divergence this module knows for a tau-balanced pair."""
    pa, qa = _paired(p, q)
    lower, upper = tv_bounds(pa, qa, tau)
    exact = tv_exact(pa, qa) if pa.size <= TV_ENUM_MAX_DIM else None
    return DivergenceReport(
        tv_exact=exact,
        tv_lower=lower,
        tv_upper=upper,
        kl=kl_product(pa, qa),
        l1=l1_distance(pa, qa),
        l2=l2_distance(pa, qa),
        tau_used=float(tau),
    )
