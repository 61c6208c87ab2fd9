"""Seeded sampling for product distributions on the Boolean hypercube.

A distribution is specified by its mean vector p in [0,1]^d: coordinate i of a
sample is an independent Bernoulli(p_i).  This module provides

* bit-packed i.i.d. sample batches (``sample`` / ``SampleBatch``),
* Poissonized per-coordinate one-counts (``poissonized_counts``): budgets
  m_i ~ Poisson(m) and counts X_i ~ Binomial(m_i, p_i), optionally conditioned
  on a budget cap,
* shared sample pools (``MaterializedPool`` / ``LazyPool``) that many tester
  calls can read without redrawing, and
* ``ProductSampler``, a seeded source that audits every draw it hands out.

Poissonization defaults to direct per-coordinate thinning, which has exactly
the same joint law as materializing ceil(2*e*m) rows and reading m_i of them
per coordinate; the explicit pool construction is available via
``from_pool=True``.  ``LazyPool`` realizes column prefix-counts of an i.i.d.
Bernoulli pool on demand (Binomial extensions, Hypergeometric refinements),
again with exactly the pool's joint law, so benchmarks at d ~ 1e4 never hold
gigabytes of rows in memory.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng

__all__ = [
    "MeanVector",
    "SampleBatch",
    "PoissonCounts",
    "CapExceeded",
    "as_mean_array",
    "check_balanced",
    "sample",
    "empirical_mean",
    "poissonized_counts",
    "SamplePool",
    "MaterializedPool",
    "LazyPool",
    "ProductSampler",
    "POOL_AUTO_ENTRY_LIMIT",
]

# Pools at most this many cells (rows * dim) are materialized under mode="auto".
POOL_AUTO_ENTRY_LIMIT = 1 << 25

# Row chunk used when generating or unpacking batches, to bound temp memory.
_GEN_CHUNK_CELLS = 1 << 24


def as_mean_array(p, name: str = "p") -> np.ndarray:
    """Coerce to a validated float64 mean vector in [0,1]^d, d >= 1."""
    if isinstance(p, MeanVector):
        return p.values
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        i = int(np.argmax((arr < 0.0) | (arr > 1.0)))
        raise ValueError(f"{name}[{i}] = {arr[i]} is outside [0, 1]")
    return arr


def check_balanced(p, tau: float, name: str = "p") -> np.ndarray:
    """Validate that every coordinate of ``p`` lies in [tau, 1-tau]."""
    arr = as_mean_array(p, name)
    if not 0.0 < tau <= 0.5:
        raise ValueError(f"tau must be in (0, 0.5], got {tau}")
    bad = (arr < tau) | (arr > 1.0 - tau)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(
            f"{name}[{i}] = {arr[i]} violates {tau}-balancedness [{tau}, {1.0 - tau}]"
        )
    return arr


@dataclass(frozen=True, slots=True)
class MeanVector:
    """Mean vector of a product distribution on {0,1}^d."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = as_mean_array(self.values, "values")
        object.__setattr__(self, "values", arr)
        arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.size

    def is_balanced(self, tau: float) -> bool:
        try:
            check_balanced(self.values, tau, "values")
        except ValueError:
            return False
        return True


@dataclass(frozen=True, slots=True)
class SampleBatch:
    """n bit-packed samples from {0,1}^d: each row stores d bits."""

    packed: np.ndarray  # shape (n, ceil(dim/8)), uint8, row-major bit packing
    n: int
    dim: int
    seed_path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 0 or self.dim <= 0:
            raise ValueError(f"invalid batch shape n={self.n}, dim={self.dim}")
        expected = (self.n, (self.dim + 7) // 8)
        if self.packed.shape != expected or self.packed.dtype != np.uint8:
            raise ValueError(
                f"packed must be uint8 with shape {expected}, got "
                f"{self.packed.dtype} {self.packed.shape}"
            )

    def unpack(self) -> np.ndarray:
        """Rows as an (n, dim) uint8 array of 0/1."""
        if self.n == 0:
            return np.zeros((0, self.dim), dtype=np.uint8)
        return np.unpackbits(self.packed, axis=1, count=self.dim)

    def column_sums(self) -> np.ndarray:
        """Per-coordinate one-counts, computed in bounded-memory chunks."""
        out = np.zeros(self.dim, dtype=np.int64)
        step = max(1, _GEN_CHUNK_CELLS // max(1, self.dim))
        for lo in range(0, self.n, step):
            rows = np.unpackbits(self.packed[lo : lo + step], axis=1, count=self.dim)
            out += rows.sum(axis=0, dtype=np.int64)
        return out

    @staticmethod
    def from_rows(rows: np.ndarray, seed_path: tuple[int, ...] = ()) -> "SampleBatch":
        rows = np.asarray(rows)
        if rows.ndim != 2:
            raise ValueError(f"rows must be 2-d, got shape {rows.shape}")
        if rows.size and not np.isin(rows, (0, 1)).all():
            raise ValueError("rows must contain only 0/1 values")
        packed = np.packbits(rows.astype(np.uint8, copy=False), axis=1)
        return SampleBatch(packed=packed, n=rows.shape[0], dim=rows.shape[1], seed_path=seed_path)


@dataclass(frozen=True, slots=True)
class PoissonCounts:
    """Poissonized one-counts: budgets m_i ~ Poisson(rate), counts X_i."""

    rate: float
    budgets: np.ndarray  # int64, per-coordinate sample budgets
    counts: np.ndarray  # int64, ones observed within each budget

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError(f"rate must be non-negative, got {self.rate}")
        if self.budgets.shape != self.counts.shape or self.budgets.ndim != 1:
            raise ValueError("budgets and counts must be 1-d arrays of equal length")
        if (self.counts < 0).any() or (self.counts > self.budgets).any():
            raise ValueError("counts must lie in [0, budget] per coordinate")

    @property
    def dim(self) -> int:
        return self.budgets.size


@dataclass(frozen=True, slots=True)
class CapExceeded:
    """Marker: some Poisson budget exceeded the cap; no counts were produced."""

    cap: int
    max_budget: int


def _bernoulli_rows(rng: np.random.Generator, p: np.ndarray, n: int) -> np.ndarray:
    """(n, d) uint8 i.i.d. Bernoulli rows, generated in bounded chunks."""
    d = p.size
    out = np.empty((n, d), dtype=np.uint8)
    step = max(1, _GEN_CHUNK_CELLS // max(1, d))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        out[lo:hi] = rng.random((hi - lo, d)) < p
    return out


def sample(p, n: int, seed: int, path: tuple[int, ...] = ()) -> SampleBatch:
    """Draw n i.i.d. samples from the product distribution with mean ``p``."""
    arr = as_mean_array(p)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    rng = make_rng(seed, *path)
    rows = _bernoulli_rows(rng, arr, n)
    return SampleBatch.from_rows(rows, seed_path=(int(seed), *path))


def empirical_mean(batch: SampleBatch) -> np.ndarray:
    """Column means of a batch; requires at least one row."""
    if batch.n == 0:
        raise ValueError("empirical_mean requires a non-empty batch")
    return batch.column_sums() / batch.n


def default_cap(m: float) -> int:
    """Budget cap ceil(2*e*m) used by the tolerant tester."""
    return math.ceil(2.0 * math.e * m)


def poissonized_counts(
    p,
    m: float,
    cap: int | None,
    seed: int | np.random.Generator,
    from_pool: bool = False,
) -> PoissonCounts | CapExceeded:
    """Per-coordinate Poissonized one-counts at rate ``m``.

    Budgets m_i ~ Poisson(m) per coordinate; if ``cap`` is given and any
    budget exceeds it, returns ``CapExceeded`` (so callers can retry).
    ``from_pool=True`` materializes a cap-row pool and reads prefix counts
    from it instead of thinning; the joint law is identical.
    """
    arr = as_mean_array(p)
    if m < 0:
        raise ValueError(f"rate m must be non-negative, got {m}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    budgets = rng.poisson(m, arr.size).astype(np.int64)
    if cap is not None:
        if cap < 0:
            raise ValueError(f"cap must be non-negative, got {cap}")
        max_budget = int(budgets.max(initial=0))
        if max_budget > cap:
            return CapExceeded(cap=int(cap), max_budget=max_budget)
    if from_pool:
        pool_rows = int(cap) if cap is not None else int(budgets.max(initial=0))
        rows = _bernoulli_rows(rng, arr, pool_rows)
        csum = rows.cumsum(axis=0, dtype=np.int64)
        idx = np.arange(arr.size)
        counts = np.where(budgets > 0, csum[np.maximum(budgets, 1) - 1, idx], 0)
    else:
        counts = rng.binomial(budgets, arr)
    return PoissonCounts(rate=float(m), budgets=budgets, counts=counts.astype(np.int64))


class SamplePool:
    """Shared multiset of i.i.d. samples, organized as repetition chunks.

    Chunk t holds ``chunk_size`` consecutive samples.  ``prefix_counts``
    reports, per requested column, how many ones appear among the first
    ``budget`` samples of that chunk.  Reading never consumes the pool;
    different tester calls may read the same rows.
    """

    def __init__(self, p: np.ndarray, n_chunks: int, chunk_size: int):
        if n_chunks <= 0 or chunk_size <= 0:
            raise ValueError(
                f"pool needs positive n_chunks and chunk_size, got {n_chunks}, {chunk_size}"
            )
        self.p = p
        self.n_chunks = int(n_chunks)
        self.chunk_size = int(chunk_size)
        self.dim = p.size

    @property
    def total_rows(self) -> int:
        return self.n_chunks * self.chunk_size

    def _check_query(self, chunk: int, cols: np.ndarray, budgets: np.ndarray) -> None:
        if not 0 <= chunk < self.n_chunks:
            raise ValueError(f"chunk {chunk} out of range [0, {self.n_chunks})")
        if cols.shape != budgets.shape or cols.ndim != 1:
            raise ValueError("cols and budgets must be 1-d arrays of equal length")
        if budgets.size and int(budgets.max()) > self.chunk_size:
            raise ValueError(
                f"budget {int(budgets.max())} exceeds chunk size {self.chunk_size}"
            )
        if budgets.size and int(budgets.min()) < 0:
            raise ValueError("budgets must be non-negative")

    def prefix_counts(self, chunk: int, cols: np.ndarray, budgets: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class MaterializedPool(SamplePool):
    """Pool with all rows generated up front (small and mid scales)."""

    def __init__(self, p: np.ndarray, n_chunks: int, chunk_size: int, seed_entropy: tuple[int, ...]):
        super().__init__(p, n_chunks, chunk_size)
        rng = make_rng(*seed_entropy)
        self._bits = _bernoulli_rows(rng, p, self.total_rows)

    def rows(self) -> np.ndarray:
        """All rows as (total_rows, dim) uint8; a direct view of pool storage."""
        return self._bits

    def prefix_counts(self, chunk: int, cols: np.ndarray, budgets: np.ndarray) -> np.ndarray:
        cols = np.asarray(cols, dtype=np.int64)
        budgets = np.asarray(budgets, dtype=np.int64)
        self._check_query(chunk, cols, budgets)
        if budgets.size == 0:
            return np.zeros(0, dtype=np.int64)
        bmax = int(budgets.max(initial=0))
        if bmax == 0:
            return np.zeros(cols.size, dtype=np.int64)
        lo = chunk * self.chunk_size
        sub = self._bits[lo : lo + bmax, cols]
        csum = sub.cumsum(axis=0, dtype=np.int64)
        idx = np.arange(cols.size)
        return np.where(budgets > 0, csum[np.maximum(budgets, 1) - 1, idx], 0)


@dataclass(slots=True)
class _ColumnState:
    positions: list[int]
    ones: list[int]
    rng: np.random.Generator


class LazyPool(SamplePool):
    """Pool whose columns are realized on demand, with the exact pool law.

    Per (chunk, column) we track one-counts at previously queried prefix
    lengths.  Extending past the longest prefix draws a Binomial increment;
    querying inside a known segment splits it with a Hypergeometric draw
    (the conditional law of ones in a sub-prefix of exchangeable Bernoulli
    positions given the segment total).  Re-querying any prefix returns the
    same count, exactly as rereading materialized rows would.
    """

    def __init__(self, p: np.ndarray, n_chunks: int, chunk_size: int, seed_entropy: tuple[int, ...]):
        super().__init__(p, n_chunks, chunk_size)
        self._entropy = tuple(int(x) for x in seed_entropy)
        self._cols: dict[tuple[int, int], _ColumnState] = {}

    def _state(self, chunk: int, col: int) -> _ColumnState:
        key = (chunk, col)
        st = self._cols.get(key)
        if st is None:
            st = _ColumnState([0], [0], make_rng(*self._entropy, chunk, col))
            self._cols[key] = st
        return st

    def _query_col(self, chunk: int, col: int, budget: int) -> int:
        if budget == 0:
            return 0
        st = self._state(chunk, col)
        pos, ones = st.positions, st.ones
        if budget > pos[-1]:
            extra = int(st.rng.binomial(budget - pos[-1], self.p[col]))
            pos.append(budget)
            ones.append(ones[-1] + extra)
            return ones[-1]
        i = bisect.bisect_left(pos, budget)
        if pos[i] == budget:
            return ones[i]
        a, c = pos[i - 1], pos[i]
        seg_ones = ones[i] - ones[i - 1]
        take = int(st.rng.hypergeometric(seg_ones, (c - a) - seg_ones, budget - a)) if seg_ones else 0
        pos.insert(i, budget)
        ones.insert(i, ones[i - 1] + take)
        return ones[i]

    def prefix_counts(self, chunk: int, cols: np.ndarray, budgets: np.ndarray) -> np.ndarray:
        cols = np.asarray(cols, dtype=np.int64)
        budgets = np.asarray(budgets, dtype=np.int64)
        self._check_query(chunk, cols, budgets)
        out = np.empty(cols.size, dtype=np.int64)
        for j in range(cols.size):
            out[j] = self._query_col(chunk, int(cols[j]), int(budgets[j]))
        return out


class ProductSampler:
    """Seeded sample source for one product distribution; audits every draw.

    Operations consume consecutive per-operation streams derived from
    ``(seed, *path, op_index)``, so a sampler replays identically for a fixed
    call sequence.  ``samples_drawn`` counts rows handed out (for Poissonized
    counts, the pool-equivalent row budget per attempt).
    """

    def __init__(self, p, seed: int, path: tuple[int, ...] = ()):
        self.p = as_mean_array(p)
        self._entropy = (int(seed), *(int(x) for x in path))
        self._op = 0
        self.samples_drawn = 0

    @property
    def dim(self) -> int:
        return self.p.size

    def _next_entropy(self) -> tuple[int, ...]:
        ent = (*self._entropy, self._op)
        self._op += 1
        return ent

    def aux_rng(self) -> np.random.Generator:
        """Fresh generator for non-sample randomness (e.g. Poisson budgets).

        Consumes an operation index like every other method, but charges no
        draws: it never observes the distribution.
        """
        return make_rng(*self._next_entropy())

    def batch(self, n: int) -> SampleBatch:
        """n fresh bit-packed rows; charges n draws."""
        ent = self._next_entropy()
        rows = _bernoulli_rows(make_rng(*ent), self.p, int(n))
        self.samples_drawn += int(n)
        return SampleBatch.from_rows(rows, seed_path=ent)

    def column_counts(self, n: int) -> np.ndarray:
        """One-counts of n fresh rows per coordinate, without materializing rows.

        Binomial(n, p_i) per coordinate: the exact law of the column sums of
        ``batch(n)``.  Charges n draws.
        """
        if n < 0:
            raise ValueError(f"n must be non-negative, got {n}")
        rng = make_rng(*self._next_entropy())
        self.samples_drawn += int(n)
        return rng.binomial(int(n), self.p).astype(np.int64)

    def poisson_counts(
        self, m: float, cap: int | None = None, from_pool: bool = False
    ) -> PoissonCounts | CapExceeded:
        """Fresh Poissonized counts at rate m; charges the row budget."""
        rng = make_rng(*self._next_entropy())
        out = poissonized_counts(self.p, m, cap, rng, from_pool=from_pool)
        if cap is not None:
            self.samples_drawn += int(cap)
        elif isinstance(out, PoissonCounts):
            self.samples_drawn += int(out.budgets.max(initial=0))
        return out

    def pool(self, n_chunks: int, chunk_size: int, mode: str = "auto") -> SamplePool:
        """Draw a shared pool of n_chunks * chunk_size rows; charges them all.

        ``mode``: "rows" materializes, "lazy" defers realization,
        "auto" materializes up to POOL_AUTO_ENTRY_LIMIT cells.
        """
        if mode not in ("auto", "rows", "lazy"):
            raise ValueError(f"unknown pool mode {mode!r}")
        ent = self._next_entropy()
        total = int(n_chunks) * int(chunk_size)
        if mode == "auto":
            mode = "rows" if total * self.dim <= POOL_AUTO_ENTRY_LIMIT else "lazy"
        cls = MaterializedPool if mode == "rows" else LazyPool
        pool = cls(self.p, n_chunks, chunk_size, ent)
        self.samples_drawn += total
        return pool
