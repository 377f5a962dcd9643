"""Binary logistic regression: IRLS maximum likelihood and L2-penalized Newton.

Both estimators run the same damped Newton loop on the (penalized) binomial
log-likelihood; IRLS is Newton with the weight matrix W = diag(m_i pi_i
(1 - pi_i)).  The fit reports convergence diagnostics instead of raising on
a stalled iteration, but aborts with SeparationError when the coefficients
run away, which for unpenalized data signals linear separability.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .numerics import sigmoid

__all__ = [
    "Estimator",
    "FitConfig",
    "FittedModel",
    "SeparationError",
    "fit",
    "predict_proba",
    "decide",
    "margin",
    "log_likelihood",
    "score",
    "accuracy",
]

MAX_STEP_HALVINGS = 30


class Estimator(str, enum.Enum):
    MLE_IRLS = "mle_irls"
    RIDGE_NEWTON = "ridge_newton"


class SeparationError(RuntimeError):
    """Coefficients exceeded the divergence cap; data is likely separable."""


@dataclass(frozen=True)
class FitConfig:
    """Estimator choice and iteration controls.

    ``lambda_l2`` is the ridge strength; the penalty added to the negative
    log-likelihood is lambda_l2 * ||beta||^2 over the penalized coordinates
    (intercept excluded unless ``penalize_intercept``).  ``beta_cap`` is the
    sup-norm divergence guard.
    """

    estimator: Estimator = Estimator.MLE_IRLS
    lambda_l2: float = 0.0
    max_iter: int = 100
    tol: float = 1e-8
    penalize_intercept: bool = False
    beta_cap: float = 1e4

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if self.lambda_l2 < 0:
            raise ValueError("lambda_l2 must be >= 0")
        if self.estimator is Estimator.MLE_IRLS and self.lambda_l2 != 0.0:
            raise ValueError("MLE_IRLS requires lambda_l2 == 0")
        if self.max_iter < 1 or self.tol <= 0:
            raise ValueError("max_iter must be >= 1 and tol > 0")


@dataclass(frozen=True)
class FittedModel:
    """Coefficients (intercept at index 0) plus fit diagnostics."""

    beta_hat: np.ndarray
    config: FitConfig
    converged: bool
    n_iter: int
    final_step_norm: float

    def __post_init__(self):
        beta = np.asarray(self.beta_hat, dtype=float)
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise ValueError("beta_hat must be a finite 1-D vector")
        object.__setattr__(self, "beta_hat", beta)

    @property
    def p(self) -> int:
        return self.beta_hat.size - 1


def augment(X: np.ndarray) -> np.ndarray:
    """Prepend the intercept column of ones."""
    return np.column_stack([np.ones(X.shape[0]), X])


def log_likelihood(ds: Dataset, beta: np.ndarray) -> float:
    """Binomial log-likelihood sum_i y_i eta_i - m_i log(1 + exp(eta_i)).

    Constant terms in y are dropped; they do not affect the optimum.
    """
    eta = augment(ds.X) @ beta
    return float(ds.y @ eta - ds.m @ np.logaddexp(0.0, eta))


def score(ds: Dataset, beta: np.ndarray) -> np.ndarray:
    """Gradient of the log-likelihood: X~^T (y - m * pi)."""
    Xt = augment(ds.X)
    pi = sigmoid(Xt @ beta)
    return Xt.T @ (ds.y - ds.m * pi)


def _penalty_diag(cfg: FitConfig, k: int) -> np.ndarray:
    d = np.full(k, cfg.lambda_l2)
    if not cfg.penalize_intercept:
        d[0] = 0.0
    return d


def penalized_objective(ds: Dataset, beta: np.ndarray, cfg: FitConfig) -> float:
    """Log-likelihood minus lambda_l2 * ||beta||^2 on penalized coordinates."""
    pen = _penalty_diag(cfg, beta.size)
    return log_likelihood(ds, beta) - float(pen @ (beta * beta))


def penalized_gradient(ds: Dataset, beta: np.ndarray, cfg: FitConfig) -> np.ndarray:
    """Gradient of penalized_objective: score - 2 lambda_l2 beta (penalized)."""
    return score(ds, beta) - 2.0 * _penalty_diag(cfg, beta.size) * beta


def fit(ds: Dataset, cfg: FitConfig = FitConfig()) -> FittedModel:
    """Maximize the (penalized) log-likelihood by damped Newton iteration.

    Convergence requires both the applied step and the penalized gradient to
    fall below tol (the gradient relative to its magnitude at beta = 0).  A
    step that worsens the objective is halved up to 30 times.  Hitting
    max_iter returns converged=False with diagnostics rather than raising;
    coefficients exceeding beta_cap in sup-norm raise SeparationError.
    """
    if ds.n < ds.p + 2:
        raise ValueError(f"need n >= p + 2 rows to fit (n={ds.n}, p={ds.p})")
    if ds.p and np.any(ds.X.std(axis=0) == 0.0):
        j = int(np.flatnonzero(ds.X.std(axis=0) == 0.0)[0])
        name = ds.feature_names[j] if ds.feature_names else f"column {j}"
        raise ValueError(f"{name} is constant and collinear with the intercept")

    Xt = augment(ds.X)
    k = ds.p + 1
    pen = _penalty_diag(cfg, k)
    beta = np.zeros(k)
    grad_ref = 1.0 + np.max(np.abs(score(ds, beta)))  # penalty gradient is 0 at 0

    obj = penalized_objective(ds, beta, cfg)
    converged = False
    step_norm = np.inf
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        pi = sigmoid(Xt @ beta)
        w = ds.m * pi * (1.0 - pi)
        grad = Xt.T @ (ds.y - ds.m * pi) - 2.0 * pen * beta
        hess = (Xt * w[:, None]).T @ Xt + np.diag(2.0 * pen)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]

        t = 1.0
        beta_new = beta + step
        obj_new = penalized_objective(ds, beta_new, cfg)
        for _ in range(MAX_STEP_HALVINGS):
            if obj_new >= obj or not np.isfinite(obj):
                break
            t *= 0.5
            beta_new = beta + t * step
            obj_new = penalized_objective(ds, beta_new, cfg)

        step_norm = float(np.max(np.abs(t * step)))
        beta, obj = beta_new, obj_new
        if np.max(np.abs(beta)) > cfg.beta_cap:
            raise SeparationError(
                f"|beta| exceeded {cfg.beta_cap:g} at iteration {n_iter}; "
                "for an unpenalized fit this indicates linearly separable classes")
        grad_new = Xt.T @ (ds.y - ds.m * sigmoid(Xt @ beta)) - 2.0 * pen * beta
        if step_norm <= cfg.tol and np.max(np.abs(grad_new)) <= cfg.tol * grad_ref:
            converged = True
            break

    return FittedModel(beta, cfg, converged, n_iter, step_norm)


def _dot_beta(m: FittedModel, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains non-finite values")
    if x.ndim == 1:
        if x.size != m.p:
            raise ValueError(f"x has length {x.size}, model expects {m.p}")
        return float(m.beta_hat[0] + x @ m.beta_hat[1:])
    if x.ndim == 2:
        if x.shape[1] != m.p:
            raise ValueError(f"x has {x.shape[1]} columns, model expects {m.p}")
        return m.beta_hat[0] + x @ m.beta_hat[1:]
    raise ValueError("x must be a vector or a matrix of row vectors")


def margin(m: FittedModel, x):
    """Linear predictor x~^T beta; its sign is the decision."""
    return _dot_beta(m, x)


def predict_proba(m: FittedModel, x):
    """sigmoid(x~^T beta), elementwise over rows when x is a matrix."""
    return sigmoid(_dot_beta(m, x))


def decide(m: FittedModel, x):
    """Class 1 iff the margin is strictly positive; the boundary is class 0."""
    mg = _dot_beta(m, x)
    if np.ndim(mg) == 0:
        return int(mg > 0)
    return (mg > 0).astype(int)


def accuracy(m: FittedModel, ds: Dataset) -> float:
    """Fraction of rows where decide matches the label."""
    return float(np.mean(decide(m, ds.X) == ds.y))
