"""Benchmark engine behind the CLI: config parsing, seeded sweeps, result
persistence, tester calibration, and instance-file generation.

A sweep is the cross product of dims x epsilons x etas x taus x advice
models, with ``trials`` seeded repetitions per grid point.  Each trial draws
a fresh balanced truth vector p (unless the advice model dictates p, as the
adversarial families do), builds the advice q, runs the pipeline, and emits
one flat result row.  Rows are deterministic functions of (config, master
seed): worker count and wall-clock only affect the duration column, which is
excluded from the result hash.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import yaml

from .instances import balanced_instance, gv_code, unbalanced_instance
from .metrics import l1_distance
from .pipeline import PipelineConfig, test_and_optimize_mean
from .rng import make_rng
from .sampling import ProductSampler
from .tester import TesterConfig, Verdict, tmt_single

__all__ = [
    "SCHEMA_VERSION",
    "RESULT_COLUMNS",
    "ConfigError",
    "Constants",
    "SweepSpec",
    "load_config",
    "run_sweep",
    "write_csv",
    "write_jsonl",
    "read_result_rows",
    "result_hash",
    "rows_hash",
    "calibrate_tester",
    "CalibrationReport",
    "generate_instances",
]

SCHEMA_VERSION = 1

RESULT_COLUMNS = (
    "schema_version",
    "revision",
    "grid_index",
    "trial",
    "master_seed",
    "d",
    "epsilon",
    "delta",
    "eta",
    "tau",
    "advice_kind",
    "advice_detail",
    "true_l1",
    "stage1_outcome",
    "branch",
    "advice_returned",
    "lambda_hat",
    "samples_stage1",
    "samples_stage2",
    "samples_total",
    "baseline_n",
    "realized_l2",
    "realized_tv",
    "duration_s",
)

_ADVICE_KINDS = ("exact", "sparse", "dense", "corner", "adversarial")


def _revision() -> str:
    try:
        from importlib.metadata import version

        return version("advice-learn")
    except Exception:
        return "unknown"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"config error at {field_path}: {message}")
        self.field = field_path


@dataclass(frozen=True, slots=True)
class Constants:
    """Every schedule constant, overridable from the config file."""

    tester_c: float = 1.0
    threshold_factor: float = 2.5
    lasso_constant: float = 32.0
    baseline_constant: float = 8.0
    box_clamp: bool = True
    pool_mode: str = "auto"
    pool_multiplier: float = 1.0
    reuse_stage1: bool = False


@dataclass(frozen=True, slots=True)
class SweepSpec:
    dims: tuple[int, ...]
    epsilons: tuple[float, ...]
    etas: tuple[float, ...]
    taus: tuple[float, ...]
    delta: float
    advice_models: tuple[dict, ...]
    trials: int
    seed: int
    constants: Constants = field(default_factory=Constants)

    def grid(self) -> list[tuple[int, float, float, float, dict]]:
        return list(product(self.dims, self.epsilons, self.etas, self.taus, self.advice_models))


def _require(cond: bool, field_path: str, message: str) -> None:
    if not cond:
        raise ConfigError(field_path, message)


def _validate_advice_model(model: dict, path: str, min_dim: int) -> None:
    _require(isinstance(model, dict), path, "advice model must be a mapping")
    kind = model.get("kind")
    _require(kind in _ADVICE_KINDS, f"{path}.kind", f"kind must be one of {_ADVICE_KINDS}, got {kind!r}")
    if kind == "sparse":
        coords = model.get("coords")
        _require(isinstance(coords, int) and coords >= 1, f"{path}.coords", "coords must be a positive integer")
        _require(coords <= min_dim, f"{path}.coords", f"coords {coords} exceeds smallest dim {min_dim}")
        mag = model.get("magnitude")
        _require(isinstance(mag, (int, float)) and mag > 0, f"{path}.magnitude", "magnitude must be positive")
    elif kind == "dense":
        budget = model.get("l1_budget")
        _require(
            isinstance(budget, (int, float)) and budget >= 0, f"{path}.l1_budget", "l1_budget must be non-negative"
        )
    elif kind == "adversarial":
        family = model.get("family")
        _require(family in ("unbalanced", "balanced"), f"{path}.family", "family must be unbalanced or balanced")
        eps = model.get("epsilon")
        _require(isinstance(eps, (int, float)) and eps > 0, f"{path}.epsilon", "epsilon must be positive")
        if family == "unbalanced":
            _require(eps <= 1, f"{path}.epsilon", "epsilon must be at most 1")
            _require(min_dim >= 10, f"{path}.family", "unbalanced instances need d >= 10")
            size = model.get("subset_size")
            _require(
                isinstance(size, int) and 1 <= size <= min_dim,
                f"{path}.subset_size",
                f"subset_size must be an integer in [1, {min_dim}]",
            )
        else:
            lam = model.get("lam")
            _require(isinstance(lam, (int, float)) and lam > 0, f"{path}.lam", "lam must be positive")
            _require(lam >= 100 * eps, f"{path}.lam", "balanced family needs lam >= 100*epsilon")
            k = math.ceil(lam * lam / (eps * eps))
            _require(k <= min_dim, f"{path}.lam", f"implied subset size {k} exceeds smallest dim {min_dim}")
            _require(lam / k < 0.25, f"{path}.lam", f"implied bump lam/k = {lam / k} breaks 1/4-balancedness")


def _spec_from_mapping(raw: dict) -> SweepSpec:
    _require(isinstance(raw, dict), "<root>", "config must be a mapping")
    sweep = raw.get("sweep")
    _require(isinstance(sweep, dict), "sweep", "missing sweep section")

    def listing(name: str, pred, message: str) -> tuple:
        vals = sweep.get(name)
        _require(isinstance(vals, list) and vals, f"sweep.{name}", "must be a non-empty list")
        for i, v in enumerate(vals):
            _require(pred(v), f"sweep.{name}[{i}]", message)
        return tuple(vals)

    dims = listing("dims", lambda v: isinstance(v, int) and v >= 1, "dim must be a positive integer")
    epsilons = listing(
        "epsilons", lambda v: isinstance(v, (int, float)) and v > 0, "epsilon must be positive"
    )
    etas = listing(
        "etas", lambda v: isinstance(v, (int, float)) and 0 <= v <= 0.25, "eta must be in [0, 0.25]"
    )
    taus = listing(
        "taus", lambda v: isinstance(v, (int, float)) and 0 < v <= 0.5, "tau must be in (0, 0.5]"
    )
    delta = sweep.get("delta")
    _require(isinstance(delta, (int, float)) and 0 < delta < 1, "sweep.delta", "delta must be in (0, 1)")
    trials = sweep.get("trials")
    _require(isinstance(trials, int) and trials >= 1, "sweep.trials", "trials must be a positive integer")
    seed = sweep.get("seed")
    _require(isinstance(seed, int) and seed >= 0, "sweep.seed", "seed must be a non-negative integer")
    advice = sweep.get("advice")
    _require(isinstance(advice, list) and advice, "sweep.advice", "must be a non-empty list of advice models")
    for i, model in enumerate(advice):
        _validate_advice_model(model, f"sweep.advice[{i}]", min(dims))

    constants = raw.get("constants", {})
    _require(isinstance(constants, dict), "constants", "must be a mapping")
    known = {f: getattr(Constants, f) for f in Constants.__dataclass_fields__}
    for key in constants:
        _require(key in known, f"constants.{key}", f"unknown constant (known: {sorted(known)})")
    try:
        consts = Constants(**constants)
    except TypeError as exc:
        raise ConfigError("constants", str(exc)) from exc
    _require(consts.tester_c > 0, "constants.tester_c", "must be positive")
    _require(2 < consts.threshold_factor < 3, "constants.threshold_factor", "must be in (2, 3)")
    _require(consts.lasso_constant > 0, "constants.lasso_constant", "must be positive")
    _require(consts.baseline_constant > 0, "constants.baseline_constant", "must be positive")
    _require(
        consts.pool_mode in ("auto", "rows", "lazy"), "constants.pool_mode", "must be auto, rows, or lazy"
    )
    _require(consts.pool_multiplier > 0, "constants.pool_multiplier", "must be positive")

    # Schedule feasibility: the ladder needs 2*alpha < zeta at every grid point.
    for d in dims:
        for eps in epsilons:
            for eta in etas:
                for tau in taus:
                    alpha = eps * d ** ((3.0 * eta - 1.0) / 2.0) / tau
                    zeta = 4.0 * eps * math.sqrt(d)
                    _require(
                        2 * alpha < zeta,
                        "sweep.dims",
                        f"schedule infeasible at (d={d}, eta={eta}, tau={tau}): "
                        f"ladder base {alpha} is not below ceiling {zeta}/2",
                    )

    return SweepSpec(
        dims=dims,
        epsilons=epsilons,
        etas=etas,
        taus=taus,
        delta=float(delta),
        advice_models=tuple(dict(m) for m in advice),
        trials=trials,
        seed=seed,
        constants=consts,
    )


def load_config(path: str) -> SweepSpec:
    """Parse and validate a YAML sweep config; raises ConfigError with a field path."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from exc
    return _spec_from_mapping(raw)


def _build_advice(
    model: dict, d: int, tau: float, p_rng: np.random.Generator, q_rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, str]:
    """(p, q, detail) for one trial.  Adversarial families fix p themselves."""
    kind = model["kind"]
    if kind == "adversarial":
        family = model["family"]
        eps = float(model["epsilon"])
        inst_seed = int(q_rng.integers(2**62))
        if family == "unbalanced":
            size = int(model["subset_size"])
            code = gv_code(d, size, 0, 1, inst_seed)
            p, q = unbalanced_instance(d, eps, code.sets[0])
            detail = f"family=unbalanced epsilon={eps} subset_size={size}"
        else:
            lam = float(model["lam"])
            k = math.ceil(lam * lam / (eps * eps))
            code = gv_code(d, k, 0, 1, inst_seed)
            p, q, k = balanced_instance(d, eps, lam, code.sets[0])
            detail = f"family=balanced epsilon={eps} lam={lam} k={k}"
        return p, q, detail

    p = p_rng.uniform(tau, 1.0 - tau, d)
    if kind == "exact":
        return p, p.copy(), ""
    if kind == "corner":
        q = np.where(p <= 0.5, 1.0, 0.0)
        return p, q, ""
    if kind == "sparse":
        coords = int(model["coords"])
        mag = float(model["magnitude"])
        idx = q_rng.choice(d, size=coords, replace=False)
        signs = q_rng.choice([-1.0, 1.0], size=coords)
        q = p.copy()
        q[idx] = np.clip(q[idx] + signs * mag, 0.0, 1.0)
        return p, q, f"coords={coords} magnitude={mag}"
    if kind == "dense":
        budget = float(model["l1_budget"])
        signs = q_rng.choice([-1.0, 1.0], size=d)
        q = np.clip(p + signs * (budget / d), 0.0, 1.0)
        return p, q, f"l1_budget={budget}"
    raise ValueError(f"unknown advice kind {kind!r}")


def _run_trial(spec: SweepSpec, grid_index: int, point, trial: int) -> dict:
    d, eps, eta, tau, model = point
    consts = spec.constants
    p_rng = make_rng(spec.seed, grid_index, trial, 0)
    q_rng = make_rng(spec.seed, grid_index, trial, 1)
    p, q, detail = _build_advice(model, d, tau, p_rng, q_rng)
    sampler = ProductSampler(p, spec.seed, (grid_index, trial, 2))
    cfg = PipelineConfig(
        epsilon=eps,
        delta=spec.delta,
        eta=eta,
        tau=tau,
        advice=q,
        tester_c=consts.tester_c,
        threshold_factor=consts.threshold_factor,
        lasso_constant=consts.lasso_constant,
        baseline_constant=consts.baseline_constant,
        box_clamp=consts.box_clamp,
        pool_mode=consts.pool_mode,
        pool_multiplier=consts.pool_multiplier,
        reuse_stage1=consts.reuse_stage1,
    )
    start = time.perf_counter()
    rec = test_and_optimize_mean(sampler, cfg)
    elapsed = time.perf_counter() - start
    return {
        "schema_version": SCHEMA_VERSION,
        "revision": _revision(),
        "grid_index": grid_index,
        "trial": trial,
        "master_seed": spec.seed,
        "d": d,
        "epsilon": float(eps),
        "delta": spec.delta,
        "eta": float(eta),
        "tau": float(tau),
        "advice_kind": model["kind"],
        "advice_detail": detail,
        "true_l1": rec.true_l1,
        "stage1_outcome": rec.stage1_outcome.value,
        "branch": rec.branch.value,
        "advice_returned": rec.advice_returned,
        "lambda_hat": rec.lambda_,
        "samples_stage1": rec.samples_stage1,
        "samples_stage2": rec.samples_stage2,
        "samples_total": rec.samples_total,
        "baseline_n": rec.baseline_n,
        "realized_l2": rec.realized_l2,
        "realized_tv": rec.realized_tv,
        "duration_s": elapsed,
    }


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[dict]:
    """All trial rows for the sweep, ordered by (grid_index, trial).

    Rows are pure functions of (spec, master seed); workers only change
    timing.  Ordering is restored after the parallel section, so output files
    are deterministic for any worker count.
    """
    grid = spec.grid()
    tasks = [(gi, point, t) for gi, point in enumerate(grid) for t in range(spec.trials)]
    if workers <= 1:
        rows = [_run_trial(spec, gi, point, t) for gi, point, t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda a: _run_trial(spec, *a), tasks))
    rows.sort(key=lambda r: (r["grid_index"], r["trial"]))
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in RESULT_COLUMNS])


def write_jsonl(rows: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps({col: row[col] for col in RESULT_COLUMNS}) + "\n")


def read_result_rows(path: str) -> list[dict]:
    """Read rows back from a CSV result file (all values as strings)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def rows_hash(rows: list[dict], exclude: tuple[str, ...] = ("duration_s",)) -> str:
    """Order-sensitive digest of result rows, ignoring excluded columns."""
    cols = [c for c in RESULT_COLUMNS if c not in exclude]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_fmt(row[col]) for col in cols])
    return hashlib.sha256(buf.getvalue().encode("utf-8")).hexdigest()


def result_hash(path: str, exclude: tuple[str, ...] = ("duration_s",)) -> str:
    """Digest of a written CSV result file, ignoring excluded columns."""
    return rows_hash(read_result_rows(path), exclude=exclude)


@dataclass(frozen=True, slots=True)
class CalibrationReport:
    """Single-shot accept rates per candidate c at four l2 distances."""

    d: int
    epsilon: float
    trials: int
    distances: tuple[float, float, float, float]
    rows: tuple[dict, ...]  # {"c": float, "accept_rates": (r0, r1, r2, r3)}
    recommended_c: float | None


_DEFAULT_C_GRID = (0.25, 0.354, 0.5, 0.707, 1.0, 1.414, 2.0, 2.828, 4.0)


def calibrate_tester(
    d: int,
    epsilon: float,
    trials: int,
    seed: int,
    c_values: tuple[float, ...] = _DEFAULT_C_GRID,
) -> CalibrationReport:
    """Sweep the statistic scale c and measure single-shot accept rates.

    Distances 0, epsilon, 2*epsilon, 3*epsilon are realized by shifting half
    the coordinates of a flat reference up and half down.  Recommends the
    smallest c whose error is at most 1/4 at both decision boundaries
    (reject rate at distance 0, accept rate at 2*epsilon).
    """
    if trials < 100:
        raise ValueError(f"calibration needs at least 100 trials, got {trials}")
    distances = (0.0, epsilon, 2.0 * epsilon, 3.0 * epsilon)
    if distances[-1] > math.sqrt(d) / 2.0:
        raise ValueError(
            f"3*epsilon = {distances[-1]} is not realizable inside [0,1]^{d}; increase d"
        )
    q = np.full(d, 0.5)
    signs = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    rows = []
    for ci, c in enumerate(c_values):
        rates = []
        for di, dist in enumerate(distances):
            p = q + signs * (dist / math.sqrt(d))
            sampler = ProductSampler(p, seed, (ci, di))
            cfg = TesterConfig(epsilon=epsilon, delta=0.5, c=c)
            accepts = sum(
                tmt_single(sampler, q, cfg).verdict is Verdict.ACCEPT for _ in range(trials)
            )
            rates.append(accepts / trials)
        rows.append({"c": float(c), "accept_rates": tuple(rates)})
    recommended = None
    for row in rows:
        r0, _, r2, _ = row["accept_rates"]
        if (1.0 - r0) <= 0.25 and r2 <= 0.25:
            recommended = row["c"]
            break
    return CalibrationReport(
        d=d,
        epsilon=epsilon,
        trials=trials,
        distances=distances,
        rows=tuple(rows),
        recommended_c=recommended,
    )


def generate_instances(
    family: str,
    d: int,
    seed: int,
    epsilon: float,
    lam: float | None = None,
    subset_size: int | None = None,
    m_sets: int = 1,
    min_symdiff: int = 0,
) -> dict:
    """Instance file payload for the gen-instances subcommand.

    Builds a subset code and one (p, q) pair per code word, with the exact
    advice error recorded per pair.
    """
    if family == "unbalanced":
        if subset_size is None:
            raise ValueError("unbalanced family needs subset_size")
        k = subset_size
    elif family == "balanced":
        if lam is None:
            raise ValueError("balanced family needs lam")
        k = math.ceil(lam * lam / (epsilon * epsilon))
    else:
        raise ValueError(f"unknown family {family!r} (expected unbalanced or balanced)")
    code = gv_code(d, k, min_symdiff, m_sets, seed)
    pairs = []
    for s in code.sets:
        if family == "unbalanced":
            p, q = unbalanced_instance(d, epsilon, s)
        else:
            p, q, _ = balanced_instance(d, epsilon, lam, s)
        pairs.append({"p": p.tolist(), "q": q.tolist(), "true_l1": l1_distance(p, q)})
    return {
        "family": family,
        "d": d,
        "seed": seed,
        "epsilon": epsilon,
        "lam": lam,
        "subset_size": k,
        "min_symdiff": min_symdiff,
        "sets": [sorted(s) for s in code.sets],
        "pairs": pairs,
    }
