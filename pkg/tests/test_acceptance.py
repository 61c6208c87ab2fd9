"""Frozen-seed acceptance runs for the headline guarantees.

Each test exercises one end-to-end claim at its stated tolerance and time
budget, so ``pytest -v tests/test_acceptance.py`` reads as a ten-line
checklist.  Seeds are fixed: every run replays the same draws.
"""

import math
import time

import cvxpy as cp
import numpy as np
import yaml

from advice_learn import bench
from advice_learn.approx_l1 import Outcome, approx_l1
from advice_learn.bench import calibrate_tester
from advice_learn.cli import main as cli_main
from advice_learn.instances import balanced_instance, gv_code, unbalanced_instance
from advice_learn.lasso import (
    L1BallConstraint,
    constrained_least_squares,
    lasso_error_bound,
    project_l1_ball,
)
from advice_learn.metrics import kl_product, l2_distance, tv_exact
from advice_learn.pipeline import (
    Branch,
    PipelineConfig,
    baseline_sample_size,
    test_and_optimize_mean as run_pipeline,
)
from advice_learn.sampling import ProductSampler, default_cap, poissonized_counts, sample
from advice_learn.tester import Verdict, tmt, z_statistic


def _passed(num: int, detail: str) -> None:
    print(f"[CRITERION {num:02d}] PASS: {detail}")


def test_criterion_01_statistic_moment_identity():
    """Mean of the collision statistic matches m^2 * ||p - q||_2^2."""
    start = time.perf_counter()
    d, m, draws = 50, 1000, 10_000
    rng = np.random.default_rng(42)
    cap = default_cap(m)
    within = 0
    for _ in range(20):
        p = rng.uniform(0.1, 0.9, size=d)
        q = np.clip(p + rng.uniform(-0.05, 0.05, size=d), 0.05, 0.95)
        target = m * m * float(((p - q) ** 2).sum())
        zs = np.empty(draws)
        for i in range(draws):
            counts = poissonized_counts(p, m, cap=cap, seed=rng)
            zs[i] = z_statistic(counts, q)
        se = zs.std(ddof=1) / math.sqrt(draws)
        within += abs(float(zs.mean()) - target) <= 4.0 * se
    elapsed = time.perf_counter() - start
    assert within >= 19
    assert elapsed < 60.0
    _passed(1, f"{within}/20 mean-vector pairs within 4 SE ({elapsed:.1f}s)")


def test_criterion_02_tester_separation():
    """Calibrated tester accepts at p = q and rejects at l2 distance 0.5."""
    start = time.perf_counter()
    d, eps, delta = 256, 0.2, 0.1
    report = calibrate_tester(d=d, epsilon=eps, trials=200, seed=20)
    c = report.recommended_c
    assert c is not None
    q = np.full(d, 0.5)
    p_far = q.copy()
    p_far[:100] += 0.05  # ||p - q||_2 = 0.5
    accepts = rejects = 0
    for t in range(100):
        near = ProductSampler(q, seed=31, path=(0, t))
        accepts += tmt(near, q, epsilon=eps, delta=delta, c=c).verdict is Verdict.ACCEPT
        far = ProductSampler(p_far, seed=31, path=(1, t))
        rejects += tmt(far, q, epsilon=eps, delta=delta, c=c).verdict is Verdict.REJECT
    elapsed = time.perf_counter() - start
    assert accepts >= 90
    assert rejects >= 90
    assert elapsed < 60.0
    _passed(2, f"c={c}: accept {accepts}/100, reject {rejects}/100 ({elapsed:.1f}s)")


def test_criterion_03_block_estimate_sandwich():
    """Block-wise l1 estimate is sandwiched for three true distances."""
    start = time.perf_counter()
    d, k, w = 256, 16, 16
    eps, eta = 0.25, 0.1
    alpha = eps * d ** ((3.0 * eta - 1.0) / 2.0)
    zeta = 4.0 * eps * math.sqrt(d)
    q = np.full(d, 0.5)
    hits = {}
    for arm, l1 in enumerate((0.0, 1.0, 4.0)):
        p = q + l1 / d
        upper = 2.0 * math.sqrt(k) * (w * alpha + 2.0 * l1)
        good = 0
        for t in range(100):
            src = ProductSampler(p, seed=101, path=(arm, t))
            out = approx_l1(src, q, k=k, alpha=alpha, zeta=zeta, delta=0.1)
            if out.outcome is not Outcome.ESTIMATE:
                continue
            good += l1 <= out.lambda_ + 1e-9 and out.lambda_ <= upper + 1e-9
        hits[l1] = good
    elapsed = time.perf_counter() - start
    assert all(good >= 85 for good in hits.values()), hits
    assert elapsed < 300.0
    detail = ", ".join(f"l1={l1:g}: {good}/100" for l1, good in hits.items())
    _passed(3, f"{detail} ({elapsed:.1f}s)")


def test_criterion_04_projection_matches_qp_oracle():
    """Projection agrees with a QP solver to 1e-6 in objective value."""
    start = time.perf_counter()
    rng = np.random.default_rng(17)
    worst = 0.0
    for i in range(200):
        d = int(rng.integers(1, 11))
        center = rng.uniform(0.05, 0.95, size=d)
        radius = float(rng.uniform(0.0, 1.5))
        v = rng.uniform(-0.5, 1.5, size=d)
        boxed = bool(i % 2)
        constraint = L1BallConstraint(center=center, radius=radius, box_clamp=boxed)
        mine = project_l1_ball(v, constraint)
        x = cp.Variable(d)
        cons = [cp.norm1(x - center) <= radius]
        if boxed:
            cons += [x >= 0, x <= 1]
        problem = cp.Problem(cp.Minimize(cp.sum_squares(x - v)), cons)
        problem.solve(solver=cp.CLARABEL)
        assert problem.value is not None
        gap = abs(float(((mine - v) ** 2).sum()) - float(problem.value))
        worst = max(worst, gap)
    elapsed = time.perf_counter() - start
    assert worst <= 1e-6
    assert elapsed < 60.0
    _passed(4, f"200 instances, worst objective gap {worst:.2e} ({elapsed:.1f}s)")


def test_criterion_05_lasso_error_bound():
    """Constrained estimate stays inside its high-probability error radius."""
    start = time.perf_counter()
    d, n, radius, delta = 8, 5000, 0.4, 0.05
    rng = np.random.default_rng(23)
    bound = lasso_error_bound(radius, n, d, delta)
    inside = 0
    for t in range(100):
        p = rng.uniform(0.3, 0.7, size=d)
        q = p.copy()
        idx = rng.choice(d, size=3, replace=False)
        q[idx] += rng.choice([-0.1, 0.1], size=3)  # ||p - q||_1 = 0.3 < radius
        batch = sample(p, n, seed=23, path=(t,))
        p_hat = constrained_least_squares(batch, q, radius)
        inside += float(np.linalg.norm(p_hat - p)) <= bound
    elapsed = time.perf_counter() - start
    assert inside >= 95
    assert elapsed < 60.0
    _passed(5, f"{inside}/100 runs within radius {bound:.4f} ({elapsed:.1f}s)")


def test_criterion_06_divergence_bounds():
    """KL sandwich and the TV upper bound hold on every balanced pair."""
    start = time.perf_counter()
    tau, d = 0.25, 12
    rng = np.random.default_rng(6)
    for _ in range(100):
        p = rng.uniform(tau, 1 - tau, size=d)
        q = rng.uniform(tau, 1 - tau, size=d)
        l2 = l2_distance(p, q)
        kl = kl_product(p, q)
        assert 2.0 * l2**2 <= kl + 1e-12
        assert kl <= (2.0 / tau) * l2**2 + 1e-12
        assert tv_exact(p, q) <= l2 / math.sqrt(tau) + 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _passed(6, f"100/100 pairs satisfy both bounds ({elapsed:.1f}s)")


def test_criterion_07_pipeline_accuracy():
    """Learned law is within eps in TV, for exact and for far-off advice."""
    start = time.perf_counter()
    d, eps, tau, eta, delta = 16, 0.3, 0.25, 0.1, 1.0 / 3.0
    results = {}
    for arm, corner in (("exact", False), ("corner", True)):
        rng = np.random.default_rng(5)
        good = 0
        for t in range(60):
            p = rng.uniform(tau, 1 - tau, size=d)
            # Farthest advice in [0,1]^d from a balanced p; the distance
            # gate then routes every trial to the fallback branch.
            q = np.where(p <= 0.5, 1.0, 0.0) if corner else p.copy()
            cfg = PipelineConfig(epsilon=eps, delta=delta, eta=eta, tau=tau, advice=q)
            src = ProductSampler(p, seed=13, path=(int(corner), t))
            record = run_pipeline(src, cfg)
            if corner:
                assert record.branch is Branch.BASELINE
            assert record.realized_tv is not None
            good += record.realized_tv <= eps
        results[arm] = good
    elapsed = time.perf_counter() - start
    assert all(good >= 40 for good in results.values()), results
    assert elapsed < 600.0
    detail = ", ".join(f"{arm}: {good}/60" for arm, good in results.items())
    _passed(7, f"{detail} trials with TV <= {eps} ({elapsed:.1f}s)")


def test_criterion_08_advice_savings_and_monotone_budgets():
    """Good advice halves the budget; totals grow with advice error."""
    start = time.perf_counter()
    d = 10_000
    eps, eta, tau, delta = 0.25, 0.1, 0.25, 0.5
    rng = np.random.default_rng(99)
    p = rng.uniform(tau, 1 - tau, size=d)

    def advice_at(l1: float) -> np.ndarray:
        q = p.copy()
        if l1 == 0.0:
            return q
        if l1 == 1.0:
            return q + np.where(q <= 0.5, 1.0, -1.0) / d
        idx = rng.choice(d, size=int(l1 / 0.2), replace=False)
        q[idx] += np.where(q[idx] <= 0.5, 0.2, -0.2)
        return q

    base = baseline_sample_size(d, eps, tau, delta)
    totals = []
    for li, l1 in enumerate((0.0, 1.0, 5.0, 25.0)):
        cfg = PipelineConfig(epsilon=eps, delta=delta, eta=eta, tau=tau, advice=advice_at(l1))
        level = []
        for t in range(2):
            src = ProductSampler(p, seed=77, path=(li, t))
            level.append(run_pipeline(src, cfg).samples_total)
        totals.append(level)
    elapsed = time.perf_counter() - start
    assert max(totals[0]) <= 0.5 * base
    means = [sum(level) / len(level) for level in totals]
    inversions = sum(means[i] > means[i + 1] for i in range(len(means) - 1))
    assert inversions <= 1, means
    assert elapsed < 1800.0
    _passed(
        8,
        f"exact-advice total {max(totals[0])} <= 0.5 * {base}; "
        f"totals {[int(m) for m in means]} with {inversions} inversions ({elapsed:.0f}s)",
    )


def test_criterion_09_instance_identities():
    """Closed-form distances of the adversarial families hold to 1e-12."""
    start = time.perf_counter()
    p, q = unbalanced_instance(d=40, epsilon=0.5, S=frozenset(range(8)))
    assert abs(float(np.abs(p - q).sum()) - 8 * 0.5 / 40) <= 1e-12

    d, lam, eps = 12_000, 10.0, 0.1
    code = gv_code(d=d, k=10_000, min_symdiff=3_000, M=3, seed=4)
    built = []
    for S in code.sets:
        p_s, q_s, k = balanced_instance(d=d, epsilon=eps, lam=lam, S=S)
        assert abs(float(np.abs(p_s - q_s).sum()) - lam) <= 1e-12
        built.append((S, p_s))
    bump = lam / k
    checked = 0
    for i in range(len(built)):
        for j in range(i + 1, len(built)):
            sym = len(built[i][0] ^ built[j][0])
            l2 = float(np.linalg.norm(built[i][1] - built[j][1]))
            assert abs(l2 - bump * math.sqrt(sym)) <= 1e-12
            assert kl_product(built[i][1], built[j][1]) <= 8.0 * bump**2 * sym + 1e-12
            checked += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _passed(9, f"l1 identities exact, {checked} code pairs verified ({elapsed:.1f}s)")


def test_criterion_10_cli_determinism(tmp_path):
    """Fixed config and seed give the same result hash on repeat runs."""
    start = time.perf_counter()
    raw = {
        "sweep": {
            "dims": [8],
            "epsilons": [0.3],
            "etas": [0.1],
            "taus": [0.25],
            "delta": 0.2,
            "trials": 2,
            "seed": 3,
            "advice": [{"kind": "exact"}, {"kind": "sparse", "coords": 2, "magnitude": 0.1}],
        }
    }
    config = tmp_path / "sweep.yaml"
    config.write_text(yaml.safe_dump(raw))
    digests = []
    for name in ("a", "b"):
        out = tmp_path / name
        args = ["learn", "--config", str(config), "--seed", "7", "--out", str(out), "--format", "csv"]
        assert cli_main(args) == 0
        digests.append(bench.result_hash(str(out) + ".csv"))
    elapsed = time.perf_counter() - start
    assert digests[0] == digests[1]
    assert elapsed < 120.0
    _passed(10, f"result hash {digests[0][:16]}... reproduced ({elapsed:.1f}s)")
