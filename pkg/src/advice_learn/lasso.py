"""Constrained least-squares learning over an l1 ball centered at the advice.

The learner minimizes the empirical squared loss (1/n) * sum_i ||y_i - b||^2
over {b : ||b - q||_1 <= r}.  Since the loss equals ||b - ybar||^2 plus a
constant, the minimizer is the Euclidean projection of the empirical mean onto
the ball, so the projection kernel (sort-based soft threshold, O(d log d)) is
the whole solver.  ``box_clamp`` additionally intersects the ball with
[0,1]^d via Dykstra alternating projections, which never hurts the distance
to any valid mean vector and makes the output a usable mean vector itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import SampleBatch, as_mean_array, empirical_mean

__all__ = [
    "L1BallConstraint",
    "project_l1_ball",
    "constrained_least_squares",
    "lasso_sample_size",
    "lasso_error_bound",
    "projected_gradient_ls",
    "squared_loss_certificate",
]

_DYKSTRA_TOL = 1e-10
_DYKSTRA_MAX_ITER = 10_000


@dataclass(frozen=True, slots=True)
class L1BallConstraint:
    """The feasible set {b : ||b - center||_1 <= radius}, optionally boxed to [0,1]^d."""

    center: np.ndarray
    radius: float
    box_clamp: bool = True

    def __post_init__(self) -> None:
        arr = as_mean_array(self.center, "center")
        object.__setattr__(self, "center", arr)
        if not self.radius >= 0.0:
            raise ValueError(f"radius must be non-negative, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.size

    def violation(self, x: np.ndarray) -> float:
        """How far x sits outside the constraint set (0 when feasible)."""
        excess = float(np.abs(x - self.center).sum()) - self.radius
        if self.box_clamp:
            excess = max(excess, float(np.max(-x, initial=0.0)), float(np.max(x - 1.0, initial=0.0)))
        return max(0.0, excess)


def _project_l1_origin(w: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of w onto {x : ||x||_1 <= radius}."""
    if radius == 0.0:
        return np.zeros_like(w)
    a = np.abs(w)
    if a.sum() <= radius:
        return w.copy()
    # Sort-based threshold: theta is the smallest value with
    # sum(max(a - theta, 0)) == radius; uniqueness up to ties in a.
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    rho = int(np.nonzero(u - (css - radius) / j > 0)[0][-1])
    theta = (css[rho] - radius) / (rho + 1)
    return np.sign(w) * np.maximum(a - theta, 0.0)


def project_l1_ball(v, constraint: L1BallConstraint) -> np.ndarray:
    """Euclidean projection of v onto the constraint set.

    Without ``box_clamp`` this is exact (shift to the origin, soft threshold).
    With it, Dykstra's alternating projections between the ball and the box
    converge to the projection onto the intersection; iteration stops when an
    alternation cycle moves the iterate by less than 1e-10.
    """
    varr = np.asarray(v, dtype=np.float64)
    if varr.shape != (constraint.dim,):
        raise ValueError(f"v has shape {varr.shape}, expected ({constraint.dim},)")
    q = constraint.center
    r = constraint.radius

    def ball(x: np.ndarray) -> np.ndarray:
        return q + _project_l1_origin(x - q, r)

    if not constraint.box_clamp:
        return ball(varr)
    # Dykstra with two sets; correction terms are what distinguishes the limit
    # from plain alternating projections (which need not give the projection).
    # Stop on the change of the corrections, not of the iterate: x can stall
    # at a face of the box for many cycles while the corrections still grow.
    x = varr.copy()
    inc_ball = np.zeros_like(x)
    inc_box = np.zeros_like(x)
    for _ in range(_DYKSTRA_MAX_ITER):
        y = ball(x + inc_ball)
        inc_ball_new = x + inc_ball - y
        x = np.clip(y + inc_box, 0.0, 1.0)
        inc_box_new = y + inc_box - x
        drift = max(
            np.abs(inc_ball_new - inc_ball).max(), np.abs(inc_box_new - inc_box).max()
        )
        inc_ball = inc_ball_new
        inc_box = inc_box_new
        if drift <= _DYKSTRA_TOL:
            break
    return x


def constrained_least_squares(
    batch: SampleBatch, q, r: float, box_clamp: bool = True
) -> np.ndarray:
    """Minimizer of the empirical squared loss over the l1 ball around q.

    Equal to project_l1_ball(empirical_mean(batch)) by the loss decomposition;
    this is the exact minimizer, not an iterative approximation.
    """
    if batch.n == 0:
        raise ValueError("empty batch")
    ybar = empirical_mean(batch)
    constraint = L1BallConstraint(center=as_mean_array(q, "q"), radius=r, box_clamp=box_clamp)
    return project_l1_ball(ybar, constraint)


def lasso_sample_size(r: float, epsilon: float, delta: float, d: int, constant: float = 32.0) -> int:
    """Samples for the constrained learner to reach l2 error epsilon.

    ceil(constant * r^2 * ln(2d/delta) / epsilon^4); inverting the error bound
    4r*sqrt(2*ln(2d/delta)/n) <= epsilon gives constant = 32.  A radius of 0
    needs no samples at all (the ball is the single point q).
    """
    if r < 0 or epsilon <= 0 or not 0 < delta < 1 or d < 1:
        raise ValueError(
            f"need r >= 0, epsilon > 0, delta in (0,1), d >= 1; got "
            f"r={r}, epsilon={epsilon}, delta={delta}, d={d}"
        )
    if r == 0.0:
        return 0
    return math.ceil(constant * r * r * math.log(2.0 * d / delta) / epsilon**4)


def lasso_error_bound(r: float, n: int, d: int, delta: float) -> float:
    """High-probability l2 error of the learner: 4r*sqrt(2*ln(2d/delta)/n)."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return 4.0 * r * math.sqrt(2.0 * math.log(2.0 * d / delta) / n)


def projected_gradient_ls(
    ybar: np.ndarray, constraint: L1BallConstraint, iters: int = 500
) -> np.ndarray:
    """Projected-gradient solve of the same least-squares problem.

    Step size 1/4 on ||b - ybar||^2 contracts toward the projection; used as
    an independent cross-check of the closed-form path, not in production.
    """
    x = constraint.center.copy()
    for _ in range(iters):
        x = project_l1_ball(0.5 * x + 0.5 * np.asarray(ybar, dtype=np.float64), constraint)
    return x


def squared_loss_certificate(ybar: np.ndarray, p, p_hat) -> tuple[float, float]:
    """Both sides of the optimality inequality ||p_hat-p||^2 <= 2<ybar-p, p_hat-p>.

    Valid whenever p is feasible for the constraint p_hat was computed under
    (first-order optimality of p_hat against the feasible point p).  Returns
    (lhs, rhs) so callers can assert lhs <= rhs + tolerance.
    """
    pa = as_mean_array(p, "p")
    ph = np.asarray(p_hat, dtype=np.float64)
    diff = ph - pa
    lhs = float(diff @ diff)
    rhs = 2.0 * float((np.asarray(ybar, dtype=np.float64) - pa) @ diff)
    return lhs, rhs
