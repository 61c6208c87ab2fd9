"""Learning product distributions on the Boolean hypercube with advice.

The library learns the mean vector of an unknown product distribution given
samples plus an untrusted advice vector: it probes the advice quality with a
tolerant l2 tester and a block-wise l1 estimator, then learns either around
the advice (l1-constrained least squares) or from scratch (empirical mean),
whichever the certified advice quality makes cheaper.  Exact small-dimension
divergence oracles, hard instance generators, and a benchmark CLI round out
the package.
"""
from .approx_l1 import ApproxL1Outcome, BlockPartition, Outcome, approx_l1, partition_blocks
from .instances import SubsetCode, balanced_instance, gv_code, unbalanced_instance
from .lasso import (
    L1BallConstraint,
    constrained_least_squares,
    lasso_error_bound,
    lasso_sample_size,
    project_l1_ball,
)
from .metrics import (
    DivergenceReport,
    divergence_report,
    kl_bernoulli,
    kl_bounds,
    kl_product,
    l1_distance,
    l2_distance,
    tv_bounds,
    tv_exact,
)
from .pipeline import (
    AuditError,
    Branch,
    ExperimentRecord,
    PipelineConfig,
    baseline_sample_size,
    sample_budget_report,
    test_and_optimize_mean,
)
from .rng import make_rng, spawn_seed
from .sampling import (
    CapExceeded,
    LazyPool,
    MaterializedPool,
    MeanVector,
    PoissonCounts,
    ProductSampler,
    SampleBatch,
    empirical_mean,
    poissonized_counts,
    sample,
)
from .tester import TesterConfig, TesterVerdict, Verdict, tmt, tmt_single, z_statistic

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ApproxL1Outcome",
    "AuditError",
    "BlockPartition",
    "Branch",
    "CapExceeded",
    "DivergenceReport",
    "ExperimentRecord",
    "L1BallConstraint",
    "LazyPool",
    "MaterializedPool",
    "MeanVector",
    "Outcome",
    "PipelineConfig",
    "PoissonCounts",
    "ProductSampler",
    "SampleBatch",
    "SubsetCode",
    "TesterConfig",
    "TesterVerdict",
    "Verdict",
    "approx_l1",
    "balanced_instance",
    "baseline_sample_size",
    "constrained_least_squares",
    "divergence_report",
    "empirical_mean",
    "gv_code",
    "kl_bernoulli",
    "kl_bounds",
    "kl_product",
    "l1_distance",
    "l2_distance",
    "lasso_error_bound",
    "lasso_sample_size",
    "make_rng",
    "partition_blocks",
    "poissonized_counts",
    "project_l1_ball",
    "sample",
    "sample_budget_report",
    "spawn_seed",
    "test_and_optimize_mean",
    "tmt",
    "tmt_single",
    "tv_bounds",
    "tv_exact",
    "unbalanced_instance",
    "z_statistic",
]
