"""Command-line interface: estimation, simulation, prediction, diagnostics.

All data interchange is CSV (JSON sidecars carry fitted hyperparameters for
reproducibility).  Exit codes: 0 success, 2 usage/input error, 3 numerical
failure.  An infinite prior scale is serialized as the literal string "inf".
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .baseball import EmpiricalConfig, read_batting_csv, run_empirical
from .errors import ShrinkageError
from .linalg import DesignMatrix, ols_location, wls_location
from .methods import METHODS, apply_method
from .models import HeteroData
from .risk import MembershipSpec, condition_diagnostics, in_l
from .simulate import DEFAULT_ESTIMATORS, SimConfig, run_risk_experiment

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _fmt(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if math.isinf(value):
        return "inf"
    return repr(float(value))


def _read_estimate_csv(path) -> HeteroData:
    """Input schema: header y,var,x1,...,xk; a missing covariate block means
    an intercept-only design."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header[:2] != ["y", "var"]:
            raise ValueError(f"{path}: header must start with y,var")
        k = len(header) - 2
        expected = ["y", "var"] + [f"x{i}" for i in range(1, k + 1)]
        if header != expected:
            raise ValueError(f"{path}: bad header {header!r}, expected {expected}")
        ys, vs, xs = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2 + k:
                raise ValueError(f"{path}: line {lineno}: expected {2 + k} fields")
            try:
                ys.append(float(row[0]))
                var = float(row[1])
                xs.append([float(c) for c in row[2:]])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric field") from None
            if not var > 0:
                raise ValueError(f"{path}: line {lineno}: var must be positive")
            vs.append(var)
    if not ys:
        raise ValueError(f"{path}: no data rows")
    if k == 0:
        x = DesignMatrix.intercept_only(len(ys))
    else:
        x = DesignMatrix(np.asarray(xs, dtype=float).T)
    return HeteroData(y=np.asarray(ys), a=np.asarray(vs), x=x)


def _membership_from_args(args) -> MembershipSpec:
    return MembershipSpec(big_m=args.membership_M, kappa=args.membership_kappa)


def cmd_estimate(args) -> int:
    data = _read_estimate_csv(args.input)
    membership = _membership_from_args(args)
    result = apply_method(
        args.method, data, model=args.model, membership=membership
    )
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "y", "var", "theta_hat", "shrink_factor"])
        for i in range(data.p):
            factor = "" if result.factor is None else _fmt(float(result.factor[i]))
            writer.writerow(
                [i + 1, _fmt(data.y[i]), _fmt(data.a[i]), _fmt(result.theta_hat[i]), factor]
            )
    sidecar = {
        "method": args.method,
        "model": args.model,
        "lambda": None if result.lam is None else ("inf" if math.isinf(result.lam) else result.lam),
        "objective": None if math.isnan(result.objective) else result.objective,
        "in_L": result.in_l,
    }
    if result.b is not None:
        b = np.asarray(result.b, dtype=float)
        sidecar["b_summary"] = {
            "min": float(b.min()), "max": float(b.max()), "mean": float(b.mean())
        }
    if result.js_factor is not None:
        sidecar["js_factor"] = result.js_factor
    if result.coef_factors is not None:
        sidecar["coef_factors"] = [float(v) for v in result.coef_factors]
    with open(str(args.out) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.p_min > args.p_max or args.p_step <= 0:
        raise ValueError("need p-min <= p-max and positive p-step")
    config = SimConfig(
        example=args.example,
        p_grid=tuple(range(args.p_min, args.p_max + 1, args.p_step)),
        reps=args.reps,
        seed=args.seed,
        estimators=tuple(args.estimators.split(",")),
        example2_variance_mode=args.example2_mode,
    )
    curve = run_risk_experiment(config)
    curve.write_csv(args.out)
    return EXIT_OK


def cmd_empirical(args) -> int:
    records = read_batting_csv(args.input)
    covariates = tuple(c for c in args.covariates.split(",") if c) if args.covariates else ()
    config = EmpiricalConfig(
        group=args.group,
        covariates=covariates,
        min_ab_train=args.min_ab_train,
        min_ab_valid=args.min_ab_valid,
        estimators=tuple(args.estimators.split(",")),
        model=args.model,
    )
    report = run_empirical(records, config, _membership_from_args(args))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.report_csv())
    factors_path = args.factors_out or (str(args.out) + ".factors.csv")
    with open(factors_path, "w", encoding="utf-8") as fh:
        fh.write(report.factors_csv())
    print(f"p_estimation={report.p_estimation} p_validation={report.p_validation}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    data = _read_estimate_csv(args.input)
    membership = _membership_from_args(args)
    diag = condition_diagnostics(data)
    _, mu_ols = ols_location(data.x, data.y)
    _, mu_wls = wls_location(data.x, data.y, data.a)
    payload = {
        "p": data.p,
        "k": data.k,
        "cond_A": diag.cond_a,
        "cond_D": diag.cond_d.tolist(),
        "cond_E": diag.cond_e.tolist(),
        "cond_F": diag.cond_f.tolist(),
        "cond_G": diag.cond_g.tolist(),
        "d_k": diag.d_k,
        "membership": {"M": membership.big_m, "kappa": membership.kappa},
        "ols_in_L": in_l(mu_ols, data.x, data.y, membership),
        "wls_in_L": in_l(mu_wls, data.x, data.y, membership),
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shrinkreg",
        description="Shrinkage estimation for heteroscedastic linear models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_membership(p):
        p.add_argument("--membership-M", type=float, default=10.0)
        p.add_argument("--membership-kappa", type=float, default=0.4)

    p_est = sub.add_parser("estimate", help="fit one estimator on a y,var,x CSV")
    p_est.add_argument("--in", dest="input", required=True)
    p_est.add_argument("--out", required=True)
    p_est.add_argument("--method", required=True, choices=[m for m in METHODS if m not in ("or", "ol")])
    p_est.add_argument("--model", type=int, default=1, choices=(1, 2))
    add_membership(p_est)
    p_est.set_defaults(func=cmd_estimate)

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo risk experiment")
    p_sim.add_argument("--example", type=int, default=1, choices=(1, 2))
    p_sim.add_argument("--p-min", type=int, default=20)
    p_sim.add_argument("--p-max", type=int, default=500)
    p_sim.add_argument("--p-step", type=int, default=20)
    p_sim.add_argument("--reps", type=int, default=5000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--estimators", default=",".join(DEFAULT_ESTIMATORS))
    p_sim.add_argument(
        "--example2-mode", default="as-written",
        choices=("as-written", "variance-matched"),
    )
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_emp = sub.add_parser("empirical", help="run the batting prediction pipeline")
    p_emp.add_argument("--in", dest="input", required=True)
    p_emp.add_argument("--group", default="all", choices=("all", "pitchers", "nonpitchers"))
    p_emp.add_argument("--covariates", default="at-bats,pitcher")
    p_emp.add_argument("--min-ab-train", type=int, default=11)
    p_emp.add_argument("--min-ab-valid", type=int, default=11)
    p_emp.add_argument(
        "--estimators",
        default="naive,ols,wls,ebmom,ebmle,js,ure-ols,ure-wls,ure,ure-sp-ols,ure-sp-wls,ure-sp",
    )
    p_emp.add_argument("--out", required=True)
    p_emp.add_argument("--factors-out", default=None)
    p_emp.add_argument("--model", type=int, default=1, choices=(1, 2))
    add_membership(p_emp)
    p_emp.set_defaults(func=cmd_empirical)

    p_diag = sub.add_parser("diagnose", help="finite-sample condition diagnostics")
    p_diag.add_argument("--in", dest="input", required=True)
    p_diag.add_argument("--out", default=None)
    add_membership(p_diag)
    p_diag.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ShrinkageError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
