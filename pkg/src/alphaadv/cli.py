"""Command line front end.

Subcommands: gen-data, fit, attack, sweep-alpha, sweep-l2, mc-check,
transfer.  Exit status 0 on success, 1 on usage errors (bad flags,
incompatible combinations, missing files), 2 on numerical or data failures
with a diagnostic on stderr.  Every randomized command is reproducible from
--seed; ALPHAADV_THREADS optionally caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import attack as attack_mod
from . import covariance as cov_mod
from . import data as data_mod
from . import glm
from . import serialize
from . import verify

USAGE_EXIT = 1
NUMERIC_EXIT = 2

_LIBRARY_ERRORS = (
    ValueError,
    data_mod.CsvFormatError,
    data_mod.ConstantColumnError,
    glm.SeparationError,
    cov_mod.IllConditionedError,
    attack_mod.AttackError,
    verify.BracketError,
    verify.CovarianceFactorizationError,
    np.linalg.LinAlgError,
)


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with status 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _parse_alpha_grid(text: str) -> list[float]:
    """Either 'a,b,c' or 'start:stop:step' (stop inclusive within 1e-9)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("alpha range must be start:stop:step")
        start, stop, step = (float(v) for v in parts)
        if step <= 0:
            raise ValueError("alpha range step must be positive")
        values = []
        k = 0
        while True:
            v = start + k * step
            if v > stop + 1e-9:
                break
            values.append(round(v, 12))
            k += 1
        return values
    return [float(v) for v in text.split(",")]


def _n_threads() -> int:
    raw = os.environ.get("ALPHAADV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _require_files(parser, *paths):
    for path in paths:
        if path is not None and not os.path.exists(path):
            parser.error(f"file not found: {path}")


def _add_csv_flags(sub):
    sub.add_argument("--data", required=True, help="input CSV path")
    sub.add_argument("--label-col", type=int, default=-1,
                     help="label column index (default: last)")
    sub.add_argument("--delimiter", default=",")
    sub.add_argument("--header", action="store_true",
                     help="skip one header line")


def _load_data(args) -> data_mod.Dataset:
    return data_mod.load_csv(args.data, label_column=args.label_col,
                             delimiter=args.delimiter, header=args.header)


def _default_beta(p: int) -> np.ndarray:
    beta = np.full(p + 1, 1.0 / np.sqrt(p)) if p else np.zeros(1)
    beta[0] = 0.0
    return beta


def _resolve_spec(parser, args) -> data_mod.DgpSpec:
    if getattr(args, "spec", None):
        _require_files(parser, args.spec)
        return data_mod.load_dgp_spec(args.spec)
    if args.beta_true:
        beta = np.asarray([float(v) for v in args.beta_true.split(",")])
        if args.p is not None and beta.size != args.p + 1:
            parser.error(f"--beta-true needs p+1={args.p + 1} values, got {beta.size}")
    else:
        if args.p is None:
            parser.error("provide --p, --beta-true or --spec")
        beta = _default_beta(args.p)
    return data_mod.DgpSpec(beta_true=beta, n=args.n, seed=args.seed)


def _write_dataset_csv(path, ds: data_mod.Dataset) -> None:
    lines = []
    for i in range(ds.n):
        cells = [serialize._fmt(v) for v in ds.X[i]]
        cells.append(str(int(ds.y[i])))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fit_config(parser, args) -> glm.FitConfig:
    estimator = glm.Estimator(args.estimator.replace("-", "_"))
    lam = args.lambda_l2
    if estimator is glm.Estimator.MLE_IRLS and lam:
        parser.error("--lambda-l2 is incompatible with --estimator mle-irls")
    return glm.FitConfig(
        estimator=estimator,
        lambda_l2=lam,
        max_iter=args.max_iter,
        tol=args.tol,
        penalize_intercept=args.penalize_intercept,
    )


def _attack_rows(ds, model, cov, alphas, n_threads):
    rows = []
    for i in range(ds.n):
        x0, y0 = ds.X[i], int(ds.y[i])
        try:
            delta0 = attack_mod.orthogonal_perturbation(model, x0)
        except attack_mod.AttackError as exc:
            for a in alphas:
                rows.append(serialize.AttackRow(i, y0, a, exc.status, None))
            continue
        req = attack_mod.AttackRequest(x0, y0, alphas[0], model, cov)
        nd = float(np.linalg.norm(delta0))
        for item in attack_mod.sweep_alpha(req, alphas, delta0, n_threads):
            rows.append(serialize.AttackRow(
                i, y0, item.alpha, item.status, item.result, nd))
    return rows


def build_parser() -> _Parser:
    parser = _Parser(prog="alphaadv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="draw a synthetic dataset to CSV")
    g.add_argument("--p", type=int, default=None)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--beta-true", default=None,
                   help="comma list, intercept first (default: 0, slopes 1/sqrt(p))")
    g.add_argument("--spec", default=None, help="flat key=value DGP config file")
    g.add_argument("--write-spec", default=None,
                   help="also write the resolved DGP config here")
    g.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit a model and persist it as JSON")
    _add_csv_flags(f)
    f.add_argument("--estimator", choices=["mle-irls", "ridge-newton"],
                   default="mle-irls")
    f.add_argument("--lambda-l2", type=float, default=0.0)
    f.add_argument("--max-iter", type=int, default=100)
    f.add_argument("--tol", type=float, default=1e-8)
    f.add_argument("--penalize-intercept", action="store_true")
    f.add_argument("--no-standardize", action="store_true",
                   help="fit on raw features (default standardizes)")
    f.add_argument("--out", required=True)

    a = sub.add_parser("attack", help="attack every row of a CSV at one alpha")
    _add_csv_flags(a)
    a.add_argument("--model", required=True)
    a.add_argument("--alpha", type=float, required=True)
    a.add_argument("--out", required=True)

    s = sub.add_parser("sweep-alpha", help="attack rows across an alpha grid")
    _add_csv_flags(s)
    s.add_argument("--model", required=True)
    s.add_argument("--alphas", required=True,
                   help="comma list or start:stop:step")
    s.add_argument("--row", type=int, default=None,
                   help="restrict to one 0-based row")
    s.add_argument("--out", required=True)

    l = sub.add_parser("sweep-l2", help="intensity quantiles across a ridge grid")
    _add_csv_flags(l)
    l.add_argument("--grid", required=True, help="comma list of lambda_l2 values")
    l.add_argument("--alpha", type=float, required=True)
    l.add_argument("--seed", type=int, default=0)
    l.add_argument("--train-frac", type=float, default=2.0 / 3.0)
    l.add_argument("--max-iter", type=int, default=100)
    l.add_argument("--tol", type=float, default=1e-8)
    l.add_argument("--penalize-intercept", action="store_true")
    l.add_argument("--no-standardize", action="store_true")
    l.add_argument("--out", required=True)

    m = sub.add_parser("mc-check", help="Monte Carlo check of one attack")
    _add_csv_flags(m)
    m.add_argument("--model", required=True)
    m.add_argument("--row", type=int, default=0)
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--trials", type=int, default=1_000_000)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--out", required=True)

    t = sub.add_parser("transfer", help="defender-retraining calibration run")
    t.add_argument("--p", type=int, default=None)
    t.add_argument("--beta-true", default=None)
    t.add_argument("--spec", default=None)
    t.add_argument("--attacker-n", type=int, required=True)
    t.add_argument("--defender-n", type=int, required=True)
    t.add_argument("--n-defenders", type=int, required=True)
    t.add_argument("--alphas", required=True)
    t.add_argument("--n-test", type=int, required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--estimator", choices=["mle-irls", "ridge-newton"],
                   default="mle-irls")
    t.add_argument("--lambda-l2", type=float, default=0.0)
    t.add_argument("--max-iter", type=int, default=100)
    t.add_argument("--tol", type=float, default=1e-8)
    t.add_argument("--penalize-intercept", action="store_true")
    t.add_argument("--out", required=True)
    return parser


def _cmd_gen_data(parser, args) -> int:
    spec = _resolve_spec(parser, args)
    ds = data_mod.generate_dgp(spec)
    _write_dataset_csv(args.out, ds)
    if args.write_spec:
        data_mod.save_dgp_spec(spec, args.write_spec)
    print(f"wrote {args.out}: n={ds.n} p={ds.p} mean(y)={ds.y.mean():.4f}")
    return 0


def _cmd_fit(parser, args) -> int:
    _require_files(parser, args.data)
    cfg = _fit_config(parser, args)
    ds = _load_data(args)
    standardizer = None
    if not args.no_standardize:
        standardizer = data_mod.fit_standardizer(ds)
        ds = data_mod.apply_standardizer(standardizer, ds)
    model = glm.fit(ds, cfg)
    cov = cov_mod.estimate_covariance(ds, model)
    serialize.save_model(args.out, model, cov, standardizer)
    acc = glm.accuracy(model, ds)
    print(f"wrote {args.out}: converged={model.converged} "
          f"n_iter={model.n_iter} in_sample_accuracy={acc:.4f}")
    return 0


def _load_bundle_and_points(parser, args):
    _require_files(parser, args.data, args.model)
    model, cov, standardizer = serialize.load_model(args.model)
    ds = _load_data(args)
    if standardizer is not None:
        ds = data_mod.apply_standardizer(standardizer, ds)
    return model, cov, ds


def _cmd_attack(parser, args) -> int:
    model, cov, ds = _load_bundle_and_points(parser, args)
    if not 0.0 < args.alpha < 1.0:
        parser.error("--alpha must lie strictly in (0, 1)")
    rows = _attack_rows(ds, model, cov, [args.alpha], _n_threads())
    serialize.write_attack_csv(args.out, rows)
    n_ok = sum(r.status == "ok" for r in rows)
    print(f"wrote {args.out}: {n_ok}/{len(rows)} attacks solved")
    return 0


def _cmd_sweep_alpha(parser, args) -> int:
    model, cov, ds = _load_bundle_and_points(parser, args)
    alphas = _parse_alpha_grid(args.alphas)
    if not alphas or not all(0.0 < a < 1.0 for a in alphas):
        parser.error("--alphas must lie strictly in (0, 1)")
    if args.row is not None:
        if not 0 <= args.row < ds.n:
            parser.error(f"--row {args.row} out of range for {ds.n} rows")
        ds = ds.take(np.asarray([args.row]))
    rows = _attack_rows(ds, model, cov, alphas, _n_threads())
    serialize.write_attack_csv(args.out, rows)
    print(f"wrote {args.out}: {len(rows)} (row, alpha) results")
    return 0


def _cmd_sweep_l2(parser, args) -> int:
    _require_files(parser, args.data)
    grid = sorted(float(v) for v in args.grid.split(","))
    ds = _load_data(args)
    if not args.no_standardize:
        ds = data_mod.apply_standardizer(data_mod.fit_standardizer(ds), ds)
    template = glm.FitConfig(
        estimator=glm.Estimator.RIDGE_NEWTON,
        lambda_l2=grid[0],
        max_iter=args.max_iter,
        tol=args.tol,
        penalize_intercept=args.penalize_intercept,
    )
    rows = verify.regularization_sweep(
        ds, grid, args.alpha, fit_template=template,
        split_fractions=(args.train_frac, 1.0 - args.train_frac),
        seed=args.seed, n_threads=_n_threads())
    serialize.write_sweep_l2_csv(args.out, rows)
    print(f"wrote {args.out}: {len(rows)} grid points")
    return 0


def _cmd_mc_check(parser, args) -> int:
    model, cov, ds = _load_bundle_and_points(parser, args)
    if not 0 <= args.row < ds.n:
        parser.error(f"--row {args.row} out of range for {ds.n} rows")
    x0, y0 = ds.X[args.row], int(ds.y[args.row])
    delta0 = attack_mod.orthogonal_perturbation(model, x0)
    req = attack_mod.AttackRequest(x0, y0, args.alpha, model, cov)
    result = attack_mod.solve_intensity(req, delta0)
    report = verify.mc_belief_check(req, result, args.trials, args.seed)
    doc = serialize.mc_report_to_dict(report)
    doc["lambda_star"] = result.lambda_star
    doc["saturated"] = result.saturated
    serialize.save_json(args.out, doc)
    print(f"wrote {args.out}: rate={report.empirical_rate:.6f} "
          f"target={report.target_alpha} pass={report.passed}")
    return 0


def _cmd_transfer(parser, args) -> int:
    args.n = args.attacker_n  # spec carrier; per-role sizes passed explicitly
    spec = _resolve_spec(parser, args)
    alphas = _parse_alpha_grid(args.alphas)
    cfg = _fit_config(parser, args)
    report = verify.transfer_experiment(
        spec, args.attacker_n, args.defender_n, args.n_defenders,
        alphas, cfg, args.n_test, args.seed)
    serialize.save_json(args.out, serialize.transfer_report_to_dict(report))
    rates = " ".join(f"{a}:{r:.4f}" for a, r in report.per_alpha)
    print(f"wrote {args.out}: {rates}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "fit": _cmd_fit,
    "attack": _cmd_attack,
    "sweep-alpha": _cmd_sweep_alpha,
    "sweep-l2": _cmd_sweep_l2,
    "mc-check": _cmd_mc_check,
    "transfer": _cmd_transfer,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](parser, args)
    except _LIBRARY_ERRORS as exc:
        print(f"alphaadv: numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
