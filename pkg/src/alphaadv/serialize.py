"""Persistence formats used by the command line front end.

Model bundles are JSON documents with the fixed field set {beta_hat,
estimator, lambda_l2, converged, n_iter, covariance, standardizer}; the
covariance is a flat row-major array.  CSV emitters format every float with
Python's shortest round-trip repr so files are diff-stable across runs, and
their headers are fixed contracts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .attack import AttackResult
from .covariance import CovarianceEstimate
from .data import Standardizer
from .glm import FitConfig, FittedModel
from .verify import McReport, RegSweepRow, TransferReport

__all__ = [
    "ATTACK_CSV_HEADER",
    "SWEEP_L2_CSV_HEADER",
    "AttackRow",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "write_attack_csv",
    "write_sweep_l2_csv",
    "mc_report_to_dict",
    "transfer_report_to_dict",
    "save_json",
]

ATTACK_CSV_HEADER = ("row_id,y0,alpha,lambda_star,saturated,"
                     "achieved_prob,norm_delta0,norm_scaled,status")
SWEEP_L2_CSV_HEADER = "lambda_l2,acc_out,q10,median,q90,n_zero_lambda"


def _fmt(value) -> str:
    """Shortest decimal representation that round-trips the float."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def model_to_dict(model: FittedModel, covariance: CovarianceEstimate,
                  standardizer: Standardizer | None = None) -> dict:
    std = None
    if standardizer is not None:
        std = {
            "means": [float(v) for v in standardizer.means],
            "scales": [float(v) for v in standardizer.scales],
        }
    return {
        "beta_hat": [float(v) for v in model.beta_hat],
        "estimator": model.config.estimator.value,
        "lambda_l2": float(model.config.lambda_l2),
        "converged": bool(model.converged),
        "n_iter": int(model.n_iter),
        "covariance": [float(v) for v in covariance.matrix.ravel(order="C")],
        "standardizer": std,
    }


def model_from_dict(doc: dict):
    """Rebuild (model, covariance, standardizer) from a bundle document.

    Iteration controls are not part of the schema, so the config carries
    defaults and final_step_norm is reset to 0.
    """
    beta = np.asarray(doc["beta_hat"], dtype=float)
    cfg = FitConfig(estimator=doc["estimator"], lambda_l2=float(doc["lambda_l2"]))
    model = FittedModel(
        beta_hat=beta,
        config=cfg,
        converged=bool(doc["converged"]),
        n_iter=int(doc["n_iter"]),
        final_step_norm=0.0,
    )
    k = beta.size
    mat = np.asarray(doc["covariance"], dtype=float).reshape(k, k)
    ev = np.linalg.eigvalsh(mat)
    rcond = float(ev[0] / ev[-1]) if ev[-1] > 0 else 0.0
    cov = CovarianceEstimate(mat, cfg.estimator, cfg.lambda_l2, rcond)
    std = None
    if doc.get("standardizer") is not None:
        std = Standardizer(
            np.asarray(doc["standardizer"]["means"], dtype=float),
            np.asarray(doc["standardizer"]["scales"], dtype=float),
        )
    return model, cov, std


def save_model(path, model: FittedModel, covariance: CovarianceEstimate,
               standardizer: Standardizer | None = None) -> None:
    save_json(path, model_to_dict(model, covariance, standardizer))


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


@dataclass(frozen=True)
class AttackRow:
    """One emitted line of an attack (or alpha-sweep) CSV."""

    row_id: int
    y0: int
    alpha: float
    status: str
    result: AttackResult | None
    delta0_norm: float | None = None


def write_attack_csv(path, rows) -> None:
    lines = [ATTACK_CSV_HEADER]
    for row in rows:
        res = row.result
        if res is not None:
            nd = float(np.linalg.norm(res.delta0))
            cells = [
                _fmt(row.row_id), _fmt(row.y0), _fmt(row.alpha),
                _fmt(res.lambda_star), _fmt(res.saturated),
                _fmt(res.achieved_prob_estimate),
                _fmt(nd), _fmt(abs(res.lambda_star) * nd), row.status,
            ]
        else:
            cells = [
                _fmt(row.row_id), _fmt(row.y0), _fmt(row.alpha),
                "", "", "", _fmt(row.delta0_norm), "", row.status,
            ]
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_sweep_l2_csv(path, rows) -> None:
    lines = [SWEEP_L2_CSV_HEADER]
    for row in rows:
        lines.append(",".join([
            _fmt(row.lambda_l2), _fmt(row.acc_out), _fmt(row.q10),
            _fmt(row.median), _fmt(row.q90), _fmt(row.n_zero_lambda),
        ]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def mc_report_to_dict(report: McReport) -> dict:
    return {
        "n_trials": report.n_trials,
        "success_count": report.success_count,
        "empirical_rate": report.empirical_rate,
        "target_alpha": report.target_alpha,
        "binomial_3sigma": report.binomial_3sigma,
        "pass": report.passed,
        "rule": report.rule,
        "seed": report.seed,
    }


def transfer_report_to_dict(report: TransferReport) -> dict:
    return {
        "n_defenders": report.n_defenders,
        "per_alpha": [[a, r] for a, r in report.per_alpha],
        "attacker_n": report.attacker_n,
        "defender_n": report.defender_n,
        "dgp": {
            "beta_true": [float(v) for v in report.dgp.beta_true],
            "n": report.dgp.n,
            "seed": report.dgp.seed,
            "feature_law": report.dgp.feature_law,
        },
        "n_failed_defenders": report.n_failed_defenders,
        "n_attack_failures": report.n_attack_failures,
    }


def save_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
