"""Independent checks of the intensity guarantee.

Three routes, none of which reuses the closed-form quadratic:

* :func:`mc_belief_check` samples defender coefficients from the attacker's
  own Gaussian belief and counts actual decisions on the adversarial point.
* :func:`bisection_oracle` root-finds the miss-probability curve directly.
* :func:`transfer_experiment` retrains real defenders on fresh draws from
  the same generating process and measures how often they are fooled.

:func:`regularization_sweep` maps intensity quantiles and out-of-sample
accuracy across a ridge-strength grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .attack import (
    AttackError,
    AttackRequest,
    AttackResult,
    misclassification_probability,
    orthogonal_perturbation,
    solve_intensity,
)
from .covariance import covariance_ridge, estimate_covariance
from .data import Dataset, DgpSpec, generate_dgp, split
from .glm import Estimator, FitConfig, FittedModel, SeparationError, accuracy, decide, fit

__all__ = [
    "McReport",
    "TransferReport",
    "RegSweepRow",
    "BracketError",
    "CovarianceFactorizationError",
    "mc_belief_check",
    "bisection_oracle",
    "oracle_min_intensity",
    "transfer_experiment",
    "regularization_sweep",
]

MC_CHUNK = 1 << 17
EIGCLIP_RTOL = 1e-8


class BracketError(RuntimeError):
    """The probability curve does not change sign on the given bracket."""


class CovarianceFactorizationError(RuntimeError):
    """Covariance has a negative eigenvalue beyond the clipping tolerance."""


@dataclass(frozen=True)
class McReport:
    """Monte Carlo belief check outcome.

    ``rule`` records which pass criterion applied: "equality" for a
    saturated attack (the rate must sit inside the 3-sigma binomial band
    around alpha) and "at_least" for the lambda = 0 branch (the rate must
    not fall below alpha by more than the band).
    """

    n_trials: int
    success_count: int
    empirical_rate: float
    target_alpha: float
    binomial_3sigma: float
    passed: bool
    rule: str
    seed: int


@dataclass(frozen=True)
class TransferReport:
    """Aggregated defender-retraining rates, one entry per alpha."""

    n_defenders: int
    per_alpha: tuple[tuple[float, float], ...]
    attacker_n: int
    defender_n: int
    dgp: DgpSpec
    n_failed_defenders: int = 0
    n_attack_failures: int = 0


@dataclass(frozen=True)
class RegSweepRow:
    """One ridge-strength grid point of a regularization sweep."""

    lambda_l2: float
    acc_out: float
    q10: float
    median: float
    q90: float
    n_zero_lambda: int
    n_failed: int = 0


def _belief_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square-root factor with tiny-negative eigenvalue clipping."""
    ev, vec = np.linalg.eigh(cov)
    top = max(float(ev[-1]), 0.0)
    neg = ev < 0
    if np.any(-ev[neg] > EIGCLIP_RTOL * top) or (top == 0.0 and np.any(neg)):
        raise CovarianceFactorizationError(
            f"covariance has negative eigenvalue {ev.min():.3e} beyond "
            f"{EIGCLIP_RTOL:g} * lambda_max")
    return vec * np.sqrt(np.clip(ev, 0.0, None))


def mc_belief_check(req: AttackRequest, result: AttackResult,
                    n_trials: int, seed: int) -> McReport:
    """Sample beta_d from Normal(beta_a, V) and count decisions on x_adv.

    Deterministic for a fixed seed (chunked draws with a fixed chunk size).
    """
    if n_trials < 10_000:
        raise ValueError("n_trials must be at least 10^4")
    factor = _belief_factor(req.covariance.matrix)
    beta_a = req.surrogate.beta_hat
    x_adv_t = np.concatenate(([1.0], result.x_adv))
    rng = np.random.default_rng(seed)

    successes = 0
    done = 0
    while done < n_trials:
        k = min(MC_CHUNK, n_trials - done)
        draws = beta_a + rng.standard_normal((k, beta_a.size)) @ factor.T
        margins = draws @ x_adv_t
        if req.y0 == 1:
            successes += int(np.count_nonzero(margins <= 0.0))
        else:
            successes += int(np.count_nonzero(margins > 0.0))
        done += k

    rate = successes / n_trials
    band = 3.0 * np.sqrt(req.alpha * (1.0 - req.alpha) / n_trials)
    if result.saturated:
        rule = "equality"
        passed = abs(rate - req.alpha) <= band
    else:
        rule = "at_least"
        passed = rate >= req.alpha - band
    return McReport(
        n_trials=n_trials,
        success_count=successes,
        empirical_rate=rate,
        target_alpha=req.alpha,
        binomial_3sigma=float(band),
        passed=passed,
        rule=rule,
        seed=seed,
    )


def bisection_oracle(req: AttackRequest, delta0, bracket, tol: float) -> float:
    """Bisect h(lambda) = P[misclassify](lambda) - alpha to |h| <= tol.

    Requires a sign change of h across the bracket.  This route never
    touches the quadratic algebra, so it cross-checks solve_intensity.
    """
    lo, hi = sorted(float(v) for v in bracket)
    h_lo = misclassification_probability(req, lo, delta0) - req.alpha
    h_hi = misclassification_probability(req, hi, delta0) - req.alpha
    if abs(h_lo) <= tol:
        return lo
    if abs(h_hi) <= tol:
        return hi
    if np.sign(h_lo) == np.sign(h_hi):
        raise BracketError(
            f"no sign change on [{lo:g}, {hi:g}]: h={h_lo:.3e} .. {h_hi:.3e}")
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h_mid = misclassification_probability(req, mid, delta0) - req.alpha
        if abs(h_mid) <= tol:
            return mid
        if np.sign(h_mid) == np.sign(h_lo):
            lo, h_lo = mid, h_mid
        else:
            hi = mid
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    h_mid = misclassification_probability(req, mid, delta0) - req.alpha
    if abs(h_mid) <= tol:
        return mid
    raise BracketError(
        f"bracket collapsed at {mid!r} with |h| = {abs(h_mid):.3e} > tol")


def _first_crossing(req: AttackRequest, delta0, side: int,
                    lam_max: float, n_grid: int):
    """Nearest-to-zero sign-change interval of h on one side of lambda = 0."""
    span = 1.0
    while span <= lam_max:
        grid = np.linspace(0.0, side * span, n_grid)
        h = misclassification_probability(req, grid, delta0) - req.alpha
        straddle = np.flatnonzero(np.sign(h[:-1]) * np.sign(h[1:]) <= 0)
        straddle = straddle[(h[straddle] != 0.0) | (h[straddle + 1] != 0.0)]
        if straddle.size:
            i = int(straddle[0])
            return (float(grid[i]), float(grid[i + 1]))
        span *= 4.0
    return None


def oracle_min_intensity(req: AttackRequest, delta0, tol: float = 1e-10,
                         lam_max: float = 1e6, n_grid: int = 4096) -> float:
    """Grid-scan both sides of lambda = 0 for the nearest rate crossing.

    Independent oracle for the saturated branch: returns the minimum-
    lambda^2 root of P[misclassify](lambda) = alpha found by scanning plus
    bisection.  Raises BracketError when no crossing exists within lam_max.
    """
    roots = []
    for side in (1, -1):
        bracket = _first_crossing(req, delta0, side, lam_max, n_grid)
        if bracket is not None:
            roots.append(bisection_oracle(req, delta0, bracket, tol))
    if not roots:
        raise BracketError(f"no rate crossing within |lambda| <= {lam_max:g}")
    return min(roots, key=lambda lam: (lam * lam, -lam))


def _spawn_seeds(seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1)[0]) for c in children]


def _draw_correct_points(dgp: DgpSpec, model: FittedModel, n_points: int,
                         seed: int):
    """Fresh DGP draws kept only when the surrogate classifies them right."""
    rng_seed = seed
    xs, ys = [], []
    attempts = 0
    while len(xs) < n_points:
        batch = generate_dgp(replace(dgp, n=max(4 * n_points, 256), seed=rng_seed))
        keep = decide(model, batch.X) == batch.y
        for x, y in zip(batch.X[keep], batch.y[keep]):
            xs.append(x)
            ys.append(int(y))
            if len(xs) == n_points:
                break
        attempts += batch.n
        rng_seed += 1
        if attempts > 1000 + 200 * n_points:
            raise RuntimeError(
                "could not collect enough correctly classified test points; "
                "the generating process is too noisy for this surrogate")
    return np.asarray(xs), np.asarray(ys)


def transfer_experiment(dgp: DgpSpec, attacker_n: int, defender_n: int,
                        n_defenders: int, alphas, fit_cfg: FitConfig,
                        n_test_points: int, seed: int,
                        defender_fit_cfg: FitConfig | None = None) -> TransferReport:
    """End-to-end calibration against independently retrained defenders.

    One surrogate is fit on the attacker's own draw; adversarial points are
    crafted for every (test point, alpha) pair; each of n_defenders fresh
    defenders is fit on its own draw and its decisions on the crafted points
    are scored against the true labels.  Test points are fresh DGP draws
    filtered to those the surrogate classifies correctly, so every attack
    takes the saturated branch for alpha >= 1/2.  Defender fits that diverge
    or fail to converge are excluded and counted; more than 10% aborts.
    """
    alphas = [float(a) for a in alphas]
    seeds = _spawn_seeds(seed, 2 + n_defenders)
    attacker_ds = generate_dgp(replace(dgp, n=attacker_n, seed=seeds[0]))
    surrogate = fit(attacker_ds, fit_cfg)
    belief = estimate_covariance(attacker_ds, surrogate)
    xs, ys = _draw_correct_points(dgp, surrogate, n_test_points, seeds[1])

    adv_points: dict[float, list[np.ndarray]] = {a: [] for a in alphas}
    adv_labels: dict[float, list[int]] = {a: [] for a in alphas}
    n_attack_failures = 0
    for x0, y0 in zip(xs, ys):
        delta0 = orthogonal_perturbation(surrogate, x0)
        base = AttackRequest(x0, y0, alphas[0], surrogate, belief)
        for a in alphas:
            try:
                res = solve_intensity(replace(base, alpha=a), delta0)
            except AttackError:
                n_attack_failures += 1
                continue
            adv_points[a].append(res.x_adv)
            adv_labels[a].append(y0)

    adv_mat = {a: np.asarray(v) for a, v in adv_points.items() if v}
    adv_lab = {a: np.asarray(adv_labels[a]) for a in adv_mat}

    miss = {a: 0 for a in adv_mat}
    total = {a: 0 for a in adv_mat}
    n_failed = 0
    defender_cfg = fit_cfg if defender_fit_cfg is None else defender_fit_cfg
    for k in range(n_defenders):
        ds_k = generate_dgp(replace(dgp, n=defender_n, seed=seeds[2 + k]))
        try:
            defender = fit(ds_k, defender_cfg)
        except SeparationError:
            n_failed += 1
            continue
        if not defender.converged:
            n_failed += 1
            continue
        for a, pts in adv_mat.items():
            wrong = decide(defender, pts) != adv_lab[a]
            miss[a] += int(np.count_nonzero(wrong))
            total[a] += pts.shape[0]

    if n_failed > 0.1 * n_defenders:
        raise RuntimeError(
            f"{n_failed}/{n_defenders} defender fits failed (> 10%); aborting")

    per_alpha = tuple(
        (a, miss[a] / total[a] if a in total and total[a] else float("nan"))
        for a in alphas)
    return TransferReport(
        n_defenders=n_defenders - n_failed,
        per_alpha=per_alpha,
        attacker_n=attacker_n,
        defender_n=defender_n,
        dgp=dgp,
        n_failed_defenders=n_failed,
        n_attack_failures=n_attack_failures,
    )


def _sweep_one_lambda(train: Dataset, test: Dataset, lam: float, alpha: float,
                      template: FitConfig) -> RegSweepRow:
    cfg = replace(template, estimator=Estimator.RIDGE_NEWTON, lambda_l2=lam)
    model = fit(train, cfg)
    cov = covariance_ridge(train, model)
    intensities = []
    n_zero = 0
    n_failed = 0
    for x0, y0 in zip(test.X, test.y):
        try:
            delta0 = orthogonal_perturbation(model, x0)
            res = solve_intensity(
                AttackRequest(x0, int(y0), alpha, model, cov), delta0)
        except AttackError:
            n_failed += 1
            continue
        intensities.append(res.lambda_star)
        n_zero += not res.saturated
    if intensities:
        q10, med, q90 = np.quantile(intensities, [0.1, 0.5, 0.9])
    else:
        q10 = med = q90 = float("nan")
    return RegSweepRow(
        lambda_l2=lam,
        acc_out=accuracy(model, test),
        q10=float(q10),
        median=float(med),
        q90=float(q90),
        n_zero_lambda=n_zero,
        n_failed=n_failed,
    )


def regularization_sweep(data, lambda_grid, alpha: float,
                         fit_template: FitConfig | None = None,
                         split_fractions=(2.0 / 3.0, 1.0 / 3.0),
                         seed: int = 0, n_threads: int = 1) -> list[RegSweepRow]:
    """Fit, attack and score across a sorted grid of ridge strengths.

    ``data`` is either a Dataset (split into train/test here) or a DgpSpec
    (drawn first).  For each lambda the whole test partition is attacked at
    the fixed alpha; rows report out-of-sample accuracy and the 10/50/90
    percent quantiles of the resulting intensities, with lambda = 0 branch
    hits counted separately.  Per-lambda attack failures are recorded in the
    row, not raised.
    """
    grid = [float(v) for v in lambda_grid]
    if any(v < 0 for v in grid) or sorted(grid) != grid:
        raise ValueError("lambda_grid must be nonnegative and sorted ascending")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly in (0, 1)")
    ds = generate_dgp(data) if isinstance(data, DgpSpec) else data
    train, test = split(ds, split_fractions, seed)
    template = fit_template if fit_template is not None else FitConfig(
        estimator=Estimator.RIDGE_NEWTON)

    def one(lam: float) -> RegSweepRow:
        return _sweep_one_lambda(train, test, lam, alpha, template)

    if n_threads > 1 and len(grid) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            return list(pool.map(one, grid))
    return [one(lam) for lam in grid]
