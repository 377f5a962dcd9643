"""Perturbation direction and closed-form intensity for a target miss rate.

The attacker owns a surrogate fit beta_a with covariance estimate V and
believes the defender's coefficients are Normal(beta_a, V).  Along a fixed
direction delta0 the margin at x0 + lambda*delta0 is then a scalar Gaussian
in the belief, so the intensity lambda reaching a chosen misclassification
probability alpha solves

    mean(lambda) + sd(lambda) * sqrt(2) * erfinv(2*alpha_eff - 1) = 0,

with alpha_eff = alpha for y0 = 1 and 1 - alpha for y0 = 0.  Squaring turns
this into a quadratic through the matrix

    A = beta beta^T - 2 * erfinv(2*alpha_eff - 1)^2 * V,

but squaring is one-directional: every quadratic root must be re-checked
against the unsquared condition before it counts.  When the attacker already
assigns x0 itself a miss probability above alpha, the minimum-norm answer is
lambda = 0 (constraint not saturated).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .covariance import CovarianceEstimate
from .glm import FittedModel, margin
from .numerics import as_1d, inv_erf, norm_cdf, solve_quadratic

__all__ = [
    "AttackRequest",
    "AttackResult",
    "RootCandidate",
    "SweepItem",
    "AttackError",
    "NoFeasibleIntensity",
    "SpuriousRootsOnly",
    "DegenerateDirection",
    "DegenerateBelief",
    "orthogonal_perturbation",
    "misclassification_probability",
    "solve_intensity",
    "sweep_alpha",
]

# |mean + sd * s| <= RESIDUAL_RTOL * (1 + |mean|) for a root to count
RESIDUAL_RTOL = 1e-8
# |coef| below DEGENERATE_RTOL * natural scale collapses the quadratic order
DEGENERATE_RTOL = 1e-12


class AttackError(RuntimeError):
    status = "error"


class NoFeasibleIntensity(AttackError):
    """The belief admits no intensity reaching alpha along this direction."""

    status = "no_feasible_intensity"


class SpuriousRootsOnly(AttackError):
    """The quadratic has real roots, but all are squaring artifacts."""

    status = "spurious_roots_only"


class DegenerateDirection(AttackError):
    """The direction cannot move the miss-probability condition at all."""

    status = "degenerate_direction"


class DegenerateBelief(AttackError):
    """Zero belief variance along the ray; the probability is a 0/1 step."""

    status = "degenerate_belief"


@dataclass(frozen=True)
class AttackRequest:
    """Target point, its true label, the rate alpha, and the belief."""

    x0: np.ndarray
    y0: int
    alpha: float
    surrogate: FittedModel
    covariance: CovarianceEstimate

    def __post_init__(self):
        object.__setattr__(self, "x0", as_1d(self.x0, "x0"))
        if self.y0 not in (0, 1):
            raise ValueError("y0 must be 0 or 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly in (0, 1)")
        if self.x0.size != self.surrogate.p:
            raise ValueError(
                f"x0 has length {self.x0.size}, surrogate expects {self.surrogate.p}")
        if self.covariance.dim != self.surrogate.p + 1:
            raise ValueError("covariance dimension must be p + 1")


@dataclass(frozen=True)
class RootCandidate:
    """One real root of the squared condition and its validity evidence."""

    value: float
    valid: bool
    residual: float


@dataclass(frozen=True)
class AttackResult:
    delta0: np.ndarray
    lambda_star: float
    x_adv: np.ndarray
    saturated: bool
    roots: tuple[RootCandidate, ...]
    achieved_prob_estimate: float


@dataclass(frozen=True)
class SweepItem:
    """Per-alpha outcome of a sweep; failures carry a status, not an exception."""

    alpha: float
    status: str
    result: AttackResult | None


def orthogonal_perturbation(m: FittedModel, x0) -> np.ndarray:
    """L2-shortest step from x0 onto the surrogate's decision hyperplane.

    delta0 = -(margin / ||b||^2) * b with b the non-intercept coefficients;
    the result is parallel to b and cancels the margin exactly.
    """
    x0 = as_1d(x0, "x0")
    b = m.beta_hat[1:]
    nb2 = float(b @ b)
    if nb2 == 0.0:
        raise DegenerateDirection(
            "all non-intercept coefficients are zero; no boundary direction")
    return (-margin(m, x0) / nb2) * b


def _augmented(req: AttackRequest, delta0: np.ndarray):
    x0t = np.concatenate(([1.0], req.x0))
    d0t = np.concatenate(([0.0], delta0))
    return x0t, d0t


def _mean_sd(req: AttackRequest, delta0: np.ndarray, lam):
    """Belief mean and sd of the margin at x0 + lam*delta0; lam may be an array."""
    x0t, d0t = _augmented(req, delta0)
    beta = req.surrogate.beta_hat
    V = req.covariance.matrix
    lam = np.asarray(lam, dtype=float)
    mean = x0t @ beta + lam * (d0t @ beta)
    a = x0t @ V @ x0t
    b = x0t @ V @ d0t + d0t @ V @ x0t
    c = d0t @ V @ d0t
    var = a + lam * b + lam * lam * c
    if np.any(var <= 0.0):
        raise DegenerateBelief(
            "belief variance along the ray is not positive; the miss "
            "probability degenerates to a 0/1 step")
    return mean, np.sqrt(var)


def misclassification_probability(req: AttackRequest, lam, delta0) -> float:
    """Attacker-side P[defender misclassifies x0 + lam*delta0] under the belief.

    Oriented by the true label: for y0 = 1 the event is margin <= 0, for
    y0 = 0 it is margin > 0.  Accepts a scalar or an array of intensities.
    """
    delta0 = as_1d(delta0, "delta0")
    mean, sd = _mean_sd(req, delta0, lam)
    z = mean / sd
    prob = norm_cdf(-z) if req.y0 == 1 else norm_cdf(z)
    return float(prob) if np.ndim(lam) == 0 else prob


def _condition_residual(req, delta0, lam: float, s: float) -> float:
    """Value of mean + sd * s at lam; zero means the rate condition holds."""
    mean, sd = _mean_sd(req, delta0, lam)
    return float(mean + sd * s)


def solve_intensity(req: AttackRequest, delta0) -> AttackResult:
    """Minimal-|lambda| intensity whose expected miss rate is alpha.

    Dispatch: if the attacker already estimates a miss probability above
    alpha at lambda = 0, the result is lambda = 0 (saturated=False).
    Otherwise the quadratic in lambda built from A is solved, each real root
    is screened against the unsquared condition, and the valid root with
    minimal lambda^2 wins (positive root on a +/- tie).  alpha_eff = 0.5
    short-circuits to the linear mean(lambda) = 0 equation.
    """
    delta0 = as_1d(delta0, "delta0")
    if delta0.size != req.surrogate.p:
        raise ValueError("delta0 length does not match the surrogate")

    p_at_zero = misclassification_probability(req, 0.0, delta0)
    if p_at_zero > req.alpha:
        return AttackResult(
            delta0=delta0,
            lambda_star=0.0,
            x_adv=req.x0 + 0.0 * delta0,
            saturated=False,
            roots=(),
            achieved_prob_estimate=p_at_zero,
        )

    alpha_eff = req.alpha if req.y0 == 1 else 1.0 - req.alpha
    q = float(inv_erf(2.0 * alpha_eff - 1.0))
    s = math.sqrt(2.0) * q

    x0t, d0t = _augmented(req, delta0)
    beta = req.surrogate.beta_hat

    if q == 0.0:
        # alpha_eff = 1/2: the condition is mean(lambda) = 0, which is linear.
        slope = float(d0t @ beta)
        offset = float(x0t @ beta)
        scale = float(np.abs(beta).max() * max(np.linalg.norm(d0t), 1.0))
        if abs(slope) <= DEGENERATE_RTOL * scale:
            if abs(offset) <= DEGENERATE_RTOL * scale:
                raw_roots: tuple[float, ...] = (0.0,)
            else:
                raise NoFeasibleIntensity(
                    "direction is orthogonal to the coefficients; the mean "
                    "margin cannot reach zero")
        else:
            raw_roots = (-offset / slope,)
    else:
        V = req.covariance.matrix
        A = np.outer(beta, beta) - 2.0 * q * q * V
        c0 = float(x0t @ A @ x0t)
        c1 = float(x0t @ A @ d0t + d0t @ A @ x0t)
        c2 = float(d0t @ A @ d0t)
        a_scale = float(np.abs(A).max())
        nx, nd = np.linalg.norm(x0t), np.linalg.norm(d0t)
        if abs(c2) <= DEGENERATE_RTOL * a_scale * nd * nd:
            if abs(c1) <= DEGENERATE_RTOL * a_scale * 2.0 * nx * nd:
                raise DegenerateDirection(
                    "quadratic and linear coefficients both vanish along "
                    "this direction")
            raw_roots = (-c0 / c1,)
        else:
            raw_roots = solve_quadratic(c2, c1, c0)
        if not raw_roots:
            raise NoFeasibleIntensity(
                "the squared rate condition has no real root along this "
                "direction for the requested alpha")

    candidates = []
    for lam in raw_roots:
        residual = _condition_residual(req, delta0, lam, s)
        mean_here = float(x0t @ beta + lam * (d0t @ beta))
        valid = abs(residual) <= RESIDUAL_RTOL * (1.0 + abs(mean_here))
        candidates.append(RootCandidate(lam, valid, residual))
    roots = tuple(candidates)

    valid_roots = [c.value for c in roots if c.valid]
    if not valid_roots:
        raise SpuriousRootsOnly(
            "all real roots fail the unsquared rate condition "
            f"(residuals: {[c.residual for c in roots]})")
    best = min(valid_roots, key=lambda lam: (lam * lam, -lam))

    return AttackResult(
        delta0=delta0,
        lambda_star=best,
        x_adv=req.x0 + best * delta0,
        saturated=True,
        roots=roots,
        achieved_prob_estimate=misclassification_probability(req, best, delta0),
    )


def sweep_alpha(req: AttackRequest, alphas, delta0, n_threads: int = 1):
    """solve_intensity across a grid of alphas; failures become statuses.

    Items come back ordered by input index regardless of n_threads.
    """
    delta0 = as_1d(delta0, "delta0")
    alphas = [float(a) for a in alphas]
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValueError("every alpha must lie strictly in (0, 1)")

    def one(a: float) -> SweepItem:
        try:
            result = solve_intensity(replace(req, alpha=a), delta0)
            return SweepItem(a, "ok", result)
        except AttackError as exc:
            return SweepItem(a, exc.status, None)

    if n_threads > 1 and len(alphas) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            return list(pool.map(one, alphas))
    return [one(a) for a in alphas]
