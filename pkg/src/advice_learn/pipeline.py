"""The full adaptive learner: probe the advice quality, then pick the cheaper
of learning around the advice and learning from scratch.

Stage 1 runs the block-wise l1 estimator on a schedule derived from
(epsilon, eta, tau):

    k = min(ceil(d^(4*eta) / tau^4), d)      block size
    alpha = epsilon * d^((3*eta - 1)/2) / tau  ladder base tolerance
    zeta = 4 * epsilon * sqrt(d)               ladder ceiling

Stage 2 branches on the certified estimate lambda.  When lambda <
epsilon*sqrt(d) the advice is useful: either every block already accepted at
level one, in which case the advice itself is a certified answer and is
returned with no further samples, or the l1-constrained least-squares learner
runs with radius lambda, provided its sample bill does not exceed the
baseline's (the branch is a min between two costs, so it never pays more than
learning from scratch).  Otherwise the plain empirical mean is learned with
the baseline budget.  Failure budgets: delta to stage 1, delta to stage 2,
so the end-to-end guarantee d_TV <= epsilon holds with probability 1-2*delta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .approx_l1 import ApproxL1Outcome, Outcome, approx_l1, partition_blocks, pool_shape
from .lasso import L1BallConstraint, lasso_sample_size, project_l1_ball
from .metrics import TV_ENUM_MAX_DIM, l1_distance, l2_distance, tv_exact
from .sampling import MaterializedPool, ProductSampler, as_mean_array

__all__ = [
    "Branch",
    "PipelineConfig",
    "Stage2Plan",
    "ExperimentRecord",
    "BudgetRow",
    "BudgetReport",
    "AuditError",
    "baseline_sample_size",
    "plan_stage2",
    "test_and_optimize_mean",
    "sample_budget_report",
]


class Branch(Enum):
    ADVICE_LASSO = "AdviceLasso"
    BASELINE = "Baseline"


class AuditError(RuntimeError):
    """Sample accounting failed: stage totals disagree with the sampler's audit."""


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    """Run parameters plus every schedule constant, all overridable."""

    epsilon: float
    delta: float
    eta: float
    tau: float
    advice: np.ndarray
    tester_c: float = 1.0
    threshold_factor: float = 2.5
    lasso_constant: float = 32.0
    baseline_constant: float = 8.0
    box_clamp: bool = True
    pool_mode: str = "auto"
    pool_multiplier: float = 1.0
    reuse_stage1: bool = False  # experimental; needs a materialized pool

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not 0 <= self.eta <= 0.25:
            raise ValueError(f"eta must be in [0, 0.25], got {self.eta}")
        if not 0 < self.tau <= 0.5:
            raise ValueError(f"tau must be in (0, 0.5], got {self.tau}")
        object.__setattr__(self, "advice", as_mean_array(self.advice, "advice"))

    def schedule(self, d: int) -> tuple[int, float, float]:
        """(block size k, ladder base alpha, ladder ceiling zeta) at dimension d."""
        k = min(math.ceil(d ** (4.0 * self.eta) / self.tau**4), d)
        alpha = self.epsilon * d ** ((3.0 * self.eta - 1.0) / 2.0) / self.tau
        zeta = 4.0 * self.epsilon * math.sqrt(d)
        return k, alpha, zeta


def baseline_sample_size(
    d: int, epsilon: float, tau: float, delta: float, constant: float = 8.0
) -> int:
    """Empirical-mean budget ceil(C*(d + ln(2/delta)) / (tau*epsilon^2)).

    Sized so the empirical mean lands within l2 distance epsilon*sqrt(tau) of
    p, which converts to TV <= epsilon for tau-balanced p.
    """
    return math.ceil(constant * (d + math.log(2.0 / delta)) / (tau * epsilon * epsilon))


@dataclass(frozen=True, slots=True)
class Stage2Plan:
    """Resolved branch decision: what to learn and how many samples to pay."""

    branch: Branch
    n_samples: int
    advice_returned: bool = False
    radius: float | None = None  # l1 constraint radius when learning around q


def plan_stage2(
    outcome: ApproxL1Outcome, cfg: PipelineConfig, d: int, alpha: float, w: int
) -> Stage2Plan:
    """Branch decision from the stage-1 outcome.

    The advice branch is taken only when its cost is no worse than the
    baseline's, implementing the min between the two learners.  When every
    block accepted at the lowest ladder level, the advice is certified to be
    within l2 distance rho = 2*alpha*sqrt(w) of p; if rho < tau (so q is
    (tau-rho)-balanced together with p) and rho <= epsilon*sqrt(tau - rho)
    (so the balanced TV bound closes), q itself is an epsilon-accurate answer
    and no stage-2 samples are needed.
    """
    baseline_n = baseline_sample_size(
        d, cfg.epsilon, cfg.tau, cfg.delta, cfg.baseline_constant
    )
    gate = cfg.epsilon * math.sqrt(d)
    if outcome.outcome is Outcome.ESTIMATE and outcome.lambda_ < gate:
        if all(o == alpha for o in outcome.block_levels):
            rho = 2.0 * alpha * math.sqrt(w)
            if rho < cfg.tau and rho <= cfg.epsilon * math.sqrt(cfg.tau - rho):
                return Stage2Plan(Branch.ADVICE_LASSO, 0, advice_returned=True)
        stage2_epsilon = cfg.epsilon * math.sqrt(cfg.tau) / 2.0
        lasso_n = lasso_sample_size(
            outcome.lambda_, stage2_epsilon, cfg.delta, d, cfg.lasso_constant
        )
        if lasso_n <= baseline_n:
            return Stage2Plan(Branch.ADVICE_LASSO, lasso_n, radius=outcome.lambda_)
    return Stage2Plan(Branch.BASELINE, baseline_n)


@dataclass(frozen=True, slots=True)
class ExperimentRecord:
    """One pipeline run: decision trail, sample bill, and realized error."""

    config: PipelineConfig
    d: int
    branch: Branch
    advice_returned: bool
    stage1_outcome: Outcome
    lambda_: float | None
    samples_stage1: int
    samples_stage2: int
    baseline_n: int
    estimate: np.ndarray
    true_l1: float
    realized_l2: float
    realized_tv: float | None

    @property
    def samples_total(self) -> int:
        return self.samples_stage1 + self.samples_stage2


def test_and_optimize_mean(p_source: ProductSampler, cfg: PipelineConfig) -> ExperimentRecord:
    """Run the full two-stage learner against one seeded sampler.

    The sampler is the source of truth for sample accounting: the record's
    stage totals are reconciled against its audit counter and a mismatch
    raises AuditError.  p is promised tau-balanced; that promise is not
    verifiable from samples and is not checked here.
    """
    q = cfg.advice
    d = p_source.dim
    if q.size != d:
        raise ValueError(f"advice dimension {q.size} does not match sampler dimension {d}")
    k, alpha, zeta = cfg.schedule(d)
    drawn_at_start = p_source.samples_drawn

    shared_pool = None
    if cfg.reuse_stage1:
        n_chunks, chunk = pool_shape(k, alpha, zeta, cfg.delta, d, cfg.pool_multiplier)
        shared_pool = p_source.pool(n_chunks, chunk, mode="rows")
    stage1 = approx_l1(
        p_source,
        q,
        k,
        alpha,
        zeta,
        cfg.delta,
        c=cfg.tester_c,
        threshold_factor=cfg.threshold_factor,
        pool_mode=cfg.pool_mode,
        pool_multiplier=cfg.pool_multiplier,
        pool=shared_pool,
    )
    samples_stage1 = p_source.samples_drawn - drawn_at_start

    plan = plan_stage2(stage1, cfg, d, alpha, partition_blocks(d, k).w)
    before_stage2 = p_source.samples_drawn

    if plan.advice_returned:
        estimate = q.copy()
    else:
        n = plan.n_samples
        if cfg.reuse_stage1 and isinstance(shared_pool, MaterializedPool):
            # Recycle the stage-1 rows: top up with fresh draws to the target
            # count and average over the union.  Only fresh rows are charged.
            pool_rows = shared_pool.total_rows
            pool_sums = shared_pool.rows().sum(axis=0, dtype=np.int64)
            fresh = max(0, n - pool_rows)
            sums = pool_sums + (p_source.column_counts(fresh) if fresh else 0)
            ybar = sums / (pool_rows + fresh)
        else:
            counts = p_source.column_counts(n)
            ybar = counts / n
        if plan.branch is Branch.ADVICE_LASSO:
            constraint = L1BallConstraint(center=q, radius=plan.radius, box_clamp=cfg.box_clamp)
            estimate = project_l1_ball(ybar, constraint)
        else:
            estimate = ybar
    samples_stage2 = p_source.samples_drawn - before_stage2

    total_drawn = p_source.samples_drawn - drawn_at_start
    if samples_stage1 + samples_stage2 != total_drawn:
        raise AuditError(
            f"stage totals {samples_stage1} + {samples_stage2} != audited {total_drawn}"
        )

    p_true = p_source.p
    return ExperimentRecord(
        config=cfg,
        d=d,
        branch=plan.branch,
        advice_returned=plan.advice_returned,
        stage1_outcome=stage1.outcome,
        lambda_=stage1.lambda_,
        samples_stage1=samples_stage1,
        samples_stage2=samples_stage2,
        baseline_n=baseline_sample_size(
            d, cfg.epsilon, cfg.tau, cfg.delta, cfg.baseline_constant
        ),
        estimate=estimate,
        true_l1=l1_distance(p_true, q),
        realized_l2=l2_distance(p_true, estimate),
        realized_tv=tv_exact(p_true, estimate) if d <= TV_ENUM_MAX_DIM else None,
    )


@dataclass(frozen=True, slots=True)
class BudgetRow:
    true_l1: float
    n_records: int
    mean_total: float
    mean_stage1: float
    mean_stage2: float


@dataclass(frozen=True, slots=True)
class BudgetReport:
    """Mean sample bill per advice-error level, next to the from-scratch cost."""

    rows: tuple[BudgetRow, ...]
    baseline_n: int


def sample_budget_report(records: list[ExperimentRecord]) -> BudgetReport:
    """Aggregate runs sharing one configuration, bucketed by true ||p-q||_1."""
    if not records:
        raise ValueError("no records")
    key = (records[0].d, records[0].config.epsilon, records[0].config.tau, records[0].config.eta)
    for rec in records:
        if (rec.d, rec.config.epsilon, rec.config.tau, rec.config.eta) != key:
            raise ValueError(
                "records are heterogeneous: budget comparison needs a shared (d, epsilon, tau, eta)"
            )
    buckets: dict[float, list[ExperimentRecord]] = {}
    for rec in records:
        buckets.setdefault(rec.true_l1, []).append(rec)
    rows = tuple(
        BudgetRow(
            true_l1=l1,
            n_records=len(group),
            mean_total=sum(r.samples_total for r in group) / len(group),
            mean_stage1=sum(r.samples_stage1 for r in group) / len(group),
            mean_stage2=sum(r.samples_stage2 for r in group) / len(group),
        )
        for l1, group in sorted(buckets.items())
    )
    return BudgetReport(rows=rows, baseline_n=records[0].baseline_n)
