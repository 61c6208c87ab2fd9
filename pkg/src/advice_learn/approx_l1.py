"""Block-wise estimation of the l1 distance between p and the advice q.

The coordinate set is split into w = ceil(d/k) contiguous blocks of size k
(last one ragged).  For each block, a doubling ladder of tolerances
l_i = 2^(i-1) * alpha is tried in order; the tolerant tester decides, at each
level, whether the block's restricted l2 distance is below l_i, and the block
stops at its first Accept with certified level o_j.  The aggregate

    lambda = 2 * sum_j sqrt(|B_j|) * o_j

upper-bounds ||p - q||_1 and is at most 2*sqrt(k)*(ceil(d/k)*alpha +
2*||p - q||_1), both with probability 1 - delta.  If some block rejects every
level up to zeta the call returns Fail, which certifies ||p - q||_2 > zeta/2.

All tester invocations read one shared sample pool: repetition t of every
majority vote draws its Poisson budgets against chunk t of the pool, so the
votes inside one call stay independent while reuse across blocks and levels
is covered by the union bound over w * ceil(log2(zeta/alpha)) calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .sampling import ProductSampler, SamplePool, as_mean_array, default_cap
from .tester import TesterConfig, Verdict, accept_threshold, majority, poisson_rate, repetitions

__all__ = [
    "BlockPartition",
    "Outcome",
    "ApproxL1Outcome",
    "partition_blocks",
    "ladder_levels",
    "pool_shape",
    "approx_l1",
]


@dataclass(frozen=True, slots=True)
class BlockPartition:
    """Contiguous cover of range(d) by blocks of nominal size k."""

    blocks: tuple[tuple[int, int], ...]  # half-open (start, stop) ranges
    k: int
    w: int

    def sizes(self) -> list[int]:
        return [stop - start for start, stop in self.blocks]


def partition_blocks(d: int, k: int) -> BlockPartition:
    """Split range(d) into ceil(d/k) blocks: full blocks of size k, ragged tail."""
    if not 1 <= k <= d:
        raise ValueError(f"block size must satisfy 1 <= k <= d, got k={k}, d={d}")
    w = -(-d // k)
    blocks = tuple((j * k, min((j + 1) * k, d)) for j in range(w))
    return BlockPartition(blocks=blocks, k=k, w=w)


class Outcome(Enum):
    ESTIMATE = "Estimate"
    FAIL = "Fail"


@dataclass(frozen=True, slots=True)
class ApproxL1Outcome:
    outcome: Outcome
    lambda_: float | None  # present iff ESTIMATE
    block_levels: tuple[float, ...] | None  # accepted tolerance o_j per block
    samples_used: int
    levels_tried: tuple[int, ...]  # ladder calls issued per block (trace)
    failed_block: int | None = None

    def __post_init__(self) -> None:
        if self.outcome is Outcome.ESTIMATE:
            if self.lambda_ is None or self.block_levels is None:
                raise ValueError("estimate outcome must carry lambda_ and block_levels")
        elif self.failed_block is None:
            raise ValueError("fail outcome must name the failed block")


def ladder_levels(alpha: float, zeta: float) -> int:
    """Number of doubling levels: ceil(log2(zeta/alpha)); needs 2*alpha < zeta."""
    if not (alpha > 0 and zeta > 2 * alpha):
        raise ValueError(f"need 0 < 2*alpha < zeta, got alpha={alpha}, zeta={zeta}")
    return math.ceil(math.log2(zeta / alpha))


def pool_shape(
    k: int, alpha: float, zeta: float, delta: float, d: int, pool_multiplier: float = 1.0
) -> tuple[int, int]:
    """(n_chunks, chunk_size) of the shared pool.

    chunk_size = ceil(16*sqrt(k)/(3*alpha^2)) rows per repetition chunk and
    n_chunks = 1 + ceil(ln(12*w*L/delta)) repetitions, so the total matches
    the stated budget chunk_size * n_chunks exactly.  The per-call budget cap
    ceil(2e*m) can slightly exceed chunk_size at the lowest ladder level
    (2e > 16/3); such draws are treated as over-cap, an event of negligible
    probability, rather than enlarging the pool.  pool_multiplier scales the
    chunk for sensitivity studies.
    """
    if pool_multiplier <= 0:
        raise ValueError(f"pool_multiplier must be positive, got {pool_multiplier}")
    levels = ladder_levels(alpha, zeta)
    w = partition_blocks(d, k).w
    delta_call = delta / (w * levels)
    chunk = math.ceil(pool_multiplier * 16.0 * math.sqrt(k) / (3.0 * alpha * alpha))
    return repetitions(delta_call), chunk


def approx_l1(
    p_source: ProductSampler,
    q,
    k: int,
    alpha: float,
    zeta: float,
    delta: float,
    c: float = 1.0,
    threshold_factor: float = 2.5,
    pool_mode: str = "auto",
    pool_multiplier: float = 1.0,
    pool: SamplePool | None = None,
) -> ApproxL1Outcome:
    """Estimate ||p - q||_1 from one shared pool of samples.

    Returns Fail when any block exhausts its ladder (then ||p-q||_2 > zeta/2
    with probability 1-delta), otherwise the certified estimate lambda.
    samples_used is exactly the pool size; no per-block redraws happen.  A
    caller that wants to keep the pool (e.g. to recycle its rows) may draw it
    first and pass it in; it must be at least as large as the required shape
    and is then not charged here.
    """
    qa = as_mean_array(q, "q")
    if p_source.dim != qa.size:
        raise ValueError(f"dimension mismatch: sampler dim {p_source.dim} vs q dim {qa.size}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    d = qa.size
    part = partition_blocks(d, k)
    levels = ladder_levels(alpha, zeta)
    n_chunks, chunk = pool_shape(k, alpha, zeta, delta, d, pool_multiplier)
    delta_call = delta / (part.w * levels)

    before = p_source.samples_drawn
    if pool is None:
        pool = p_source.pool(n_chunks, chunk, mode=pool_mode)
    elif pool.n_chunks < n_chunks or pool.chunk_size < chunk:
        raise ValueError(
            f"supplied pool {pool.n_chunks}x{pool.chunk_size} is smaller than the "
            f"required {n_chunks}x{chunk}"
        )
    budget_rng = p_source.aux_rng()
    used = p_source.samples_drawn - before

    block_levels: list[float] = []
    levels_tried: list[int] = []
    for j, (start, stop) in enumerate(part.blocks):
        bsize = stop - start
        cols = np.arange(start, stop)
        q_block = qa[start:stop]
        accepted: float | None = None
        tried = 0
        for i in range(1, levels + 1):
            level = alpha * 2.0 ** (i - 1)
            tried += 1
            cfg = TesterConfig(
                epsilon=level, delta=delta_call, c=c, threshold_factor=threshold_factor
            )
            if level >= math.sqrt(bsize):
                # No pair of mean vectors on bsize coordinates can be further
                # than sqrt(bsize) apart, so the tester accepts structurally.
                accepted = level
                break
            m = poisson_rate(cfg, bsize)
            cap = min(default_cap(m), pool.chunk_size)
            threshold = accept_threshold(cfg, bsize)
            votes = []
            for t in range(n_chunks):
                budgets = budget_rng.poisson(m, bsize).astype(np.int64)
                if int(budgets.max(initial=0)) > cap:
                    budgets = budget_rng.poisson(m, bsize).astype(np.int64)
                if int(budgets.max(initial=0)) > cap:
                    votes.append(Verdict.REJECT)
                    continue
                counts = pool.prefix_counts(t, cols, budgets)
                centered = counts.astype(np.float64) - m * q_block
                z = float(np.sum(centered * centered - counts))
                votes.append(Verdict.ACCEPT if z <= threshold else Verdict.REJECT)
            if majority(votes) is Verdict.ACCEPT:
                accepted = level
                break
        levels_tried.append(tried)
        if accepted is None:
            return ApproxL1Outcome(
                outcome=Outcome.FAIL,
                lambda_=None,
                block_levels=None,
                samples_used=used,
                levels_tried=tuple(levels_tried),
                failed_block=j,
            )
        block_levels.append(accepted)

    lam = 2.0 * sum(math.sqrt(sz) * o for sz, o in zip(part.sizes(), block_levels))
    return ApproxL1Outcome(
        outcome=Outcome.ESTIMATE,
        lambda_=lam,
        block_levels=tuple(block_levels),
        samples_used=used,
        levels_tried=tuple(levels_tried),
    )
