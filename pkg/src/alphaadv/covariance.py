"""Asymptotic parameter covariance for the two logistic estimators.

MLE: inverse Fisher information (X~^T W X~)^-1.
Ridge (MAP): the sandwich B^-1 (X~^T W X~) B^-1 with bread
B = X~^T W X~ + 2 lambda_l2 P, where P zeroes the intercept coordinate
unless the fit penalized it.  W is always evaluated at the model's own
coefficients (plug-in).

Inversion goes through a Cholesky factorization after an explicit
reciprocal-condition check; an ill-conditioned information matrix is an
error, never silently regularized, because downstream intensities are
meant to expose exactly such pathologies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .data import Dataset
from .glm import Estimator, FittedModel, augment, predict_proba

__all__ = [
    "CovarianceEstimate",
    "IllConditionedError",
    "weight_matrix",
    "covariance_mle",
    "covariance_ridge",
    "estimate_covariance",
]

RCOND_FLOOR = 1e-12


class IllConditionedError(RuntimeError):
    """Information (or bread) matrix too close to singular to invert."""

    def __init__(self, message: str, rcond: float):
        super().__init__(f"{message} (reciprocal condition {rcond:.3e})")
        self.rcond = rcond


@dataclass(frozen=True)
class CovarianceEstimate:
    """Symmetric (p+1) x (p+1) estimate of Var(beta_hat) with provenance."""

    matrix: np.ndarray
    estimator: Estimator
    lambda_l2: float
    condition_estimate: float

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("covariance matrix must be square")
        if not np.all(np.isfinite(mat)):
            raise ValueError("covariance matrix contains non-finite values")
        scale = np.max(np.abs(mat))
        if scale > 0 and np.max(np.abs(mat - mat.T)) > 1e-10 * scale:
            raise ValueError("covariance matrix is not symmetric within 1e-10 relative")
        if np.any(np.diag(mat) < 0):
            raise ValueError("covariance diagonal must be nonnegative")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def weight_matrix(ds: Dataset, model: FittedModel) -> np.ndarray:
    """Diagonal IRLS weights m_i * pi_i * (1 - pi_i) at the fitted model."""
    pi = np.atleast_1d(predict_proba(model, ds.X))
    return ds.m * pi * (1.0 - pi)


def _information(ds: Dataset, model: FittedModel) -> np.ndarray:
    Xt = augment(ds.X)
    w = weight_matrix(ds, model)
    return (Xt * w[:, None]).T @ Xt


def _checked_rcond(mat: np.ndarray, what: str) -> float:
    ev = np.linalg.eigvalsh(mat)
    top = ev[-1]
    if top <= 0:
        raise IllConditionedError(f"{what} is not positive definite", 0.0)
    rcond = float(ev[0] / top)
    if rcond < RCOND_FLOOR:
        raise IllConditionedError(f"{what} is numerically singular", rcond)
    return rcond


def _spd_inverse(mat: np.ndarray) -> np.ndarray:
    factor = linalg.cho_factor(mat, lower=True)
    return linalg.cho_solve(factor, np.eye(mat.shape[0]))


def covariance_mle(ds: Dataset, model: FittedModel) -> CovarianceEstimate:
    """(X~^T W X~)^-1, symmetrized; errors when numerically singular."""
    if model.p != ds.p:
        raise ValueError(f"model has p={model.p}, dataset has p={ds.p}")
    info = _information(ds, model)
    rcond = _checked_rcond(info, "Fisher information matrix")
    inv = _spd_inverse(info)
    return CovarianceEstimate(0.5 * (inv + inv.T), Estimator.MLE_IRLS, 0.0, rcond)


def covariance_ridge(ds: Dataset, model: FittedModel) -> CovarianceEstimate:
    """Sandwich B^-1 (X~^T W X~) B^-1 with B = X~^T W X~ + 2 lambda_l2 P.

    lambda_l2 and the intercept-penalty convention come from the model's own
    FitConfig, so the covariance always matches the objective that was fit.
    """
    if model.p != ds.p:
        raise ValueError(f"model has p={model.p}, dataset has p={ds.p}")
    lam = model.config.lambda_l2
    info = _information(ds, model)
    pen = np.full(info.shape[0], 2.0 * lam)
    if not model.config.penalize_intercept:
        pen[0] = 0.0
    bread = info + np.diag(pen)
    rcond = _checked_rcond(bread, "ridge bread matrix")
    bread_inv = _spd_inverse(bread)
    sandwich = bread_inv @ info @ bread_inv
    return CovarianceEstimate(
        0.5 * (sandwich + sandwich.T), Estimator.RIDGE_NEWTON, lam, rcond)


def estimate_covariance(ds: Dataset, model: FittedModel) -> CovarianceEstimate:
    """Dispatch on the model's estimator kind."""
    if model.config.estimator is Estimator.MLE_IRLS:
        return covariance_mle(ds, model)
    return covariance_ridge(ds, model)
