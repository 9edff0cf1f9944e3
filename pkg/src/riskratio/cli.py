"""Command-line interface: fit, study, truth, figure, validate.

Exit codes: 0 success (including NA study rows), 2 usage/config error,
3 data error, 4 numerical failure of a requested single fit.
"""

from __future__ import annotations

import argparse
import datetime
import sys

import numpy as np

from . import csvio, inference, report, simlab
from .design import Categorical, build_design_matrix, parse_spec
from .eecore import fit_robust_poisson
from .errors import (
    ConfigError,
    DataError,
    RiskRatioError,
    SpecParseError,
)
from .logbin import fit_logbin_barrier, fit_logbin_ml

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

VERSION = simlab.VERSION


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskratio",
        description="Risk/prevalence ratio estimation via the semiparametric "
        "log-linear (robust Poisson) method, log-binomial ML, and "
        "Monte Carlo study tools.",
    )
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model to a CSV file")
    fit.add_argument("--csv", required=True)
    fit.add_argument("--outcome", required=True)
    fit.add_argument("--exposure", required=True)
    fit.add_argument("--spec", default=None,
                     help="term spec, e.g. '1 + A + rcs(L1,4) + L1:L2'")
    fit.add_argument("--method", default="robust-poisson",
                     choices=["robust-poisson", "logbin-ml", "logbin-ab"])
    fit.add_argument("--estimand", default="coefficient",
                     choices=["coefficient", "marginal", "both"])
    fit.add_argument("--level", type=float, default=0.95)
    fit.add_argument("--boot", type=int, default=0, metavar="B")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", default=None)
    fit.add_argument("--format", default="table", choices=["table", "machine"])

    study = sub.add_parser("study", help="run a replication study from a config file")
    study.add_argument("config")
    study.add_argument("--threads", type=int, default=1)
    study.add_argument("--out", default=None)
    study.add_argument("--format", default="table", choices=["table", "machine"])

    truth = sub.add_parser("truth", help="Monte Carlo truth of a scenario")
    truth.add_argument("--scenario", required=True)
    truth.add_argument("--n", type=int, default=1_000_000)
    truth.add_argument("--seed", type=int, default=0)

    figure = sub.add_parser("figure", help="consistency-figure data (CSV)")
    figure.add_argument("--sizes", default="10,25,50,100,250,500,1000,2000")
    figure.add_argument("--replications", type=int, default=200)
    figure.add_argument("--seed", type=int, default=0)
    figure.add_argument("--out", default=None)

    validate = sub.add_parser("validate", help="check a CSV or study config")
    validate.add_argument("--csv", default=None)
    validate.add_argument("--outcome", default=None)
    validate.add_argument("--config", default=None)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        report.write_atomic(out, text)


def _default_spec(data, exposure: str) -> str:
    others = [c for c in data.columns if c != exposure]
    return " + ".join(["1", exposure] + others)


def _fit_estimates(args, data, design, level):
    """One RR row per exposure contrast, for the chosen method/estimand."""
    if args.method == "robust-poisson":
        fit = fit_robust_poisson(design, data.y)
        cov = fit.cov_sandwich
        warnings = []
        if fit.n_mu_gt1:
            warnings.append(f"{fit.n_mu_gt1} fitted means exceed 1")
    else:
        fitter = fit_logbin_ml if args.method == "logbin-ml" else fit_logbin_barrier
        lb = fitter(design, data.y)
        if not lb.converged or lb.cov_model is None:
            raise RiskRatioError(
                f"{args.method} failed: {lb.failure_reason or 'non-convergence'} "
                f"(iterations={lb.iterations}, on_boundary={lb.on_boundary})"
            )
        fit = simlab._as_fit(lb.beta, lb.cov_model, design)
        cov = lb.cov_model
        warnings = ["on_boundary"] if lb.on_boundary else []
    if design.rank_deficient:
        warnings.append("design matrix is numerically rank deficient")

    cat = next((t for t in design.terms if isinstance(t, Categorical)
                and t.column == args.exposure), None)
    estimates = []

    def add_coeff():
        for j in design.exposure_cols:
            est = inference.coefficient_rr(fit, j, level)
            estimates.append({
                "label": design.labels[j], "estimand": "coefficient",
                "rr": est.rr, "ci_low": est.ci_low, "ci_high": est.ci_high,
                "log_rr": est.log_rr, "se_log_rr": est.se_log_rr,
                "method": est.method,
            })

    def add_marginal():
        if cat is not None:
            pairs = [(lev, cat.reference) for lev in cat.levels
                     if lev != cat.reference]
        else:
            pairs = [(1.0, 0.0)]
        for a1, a0 in pairs:
            est = inference.marginal_rr(fit, data, a1, a0, level=level)
            estimates.append({
                "label": f"{args.exposure}={a1:g} vs {a0:g}",
                "estimand": "marginal",
                "rr": est.rr, "ci_low": est.ci_low, "ci_high": est.ci_high,
                "log_rr": est.log_rr, "se_log_rr": est.se_log_rr,
                "method": est.method,
            })

    if args.estimand in ("coefficient", "both"):
        add_coeff()
    if args.estimand in ("marginal", "both"):
        add_marginal()
    if args.boot:
        def fitter_fn(d):
            dm = build_design_matrix(d, list(design.terms), exposure=args.exposure)
            return fit_robust_poisson(dm, d.y)

        def estimand_fn(f, d):
            return inference.coefficient_rr(f, design.exposure_cols[0], level)

        boot = inference.bootstrap_rr(
            fitter_fn, data, estimand_fn, B=args.boot, seed=args.seed, level=level
        )
        estimates.append({
            "label": design.labels[design.exposure_cols[0]],
            "estimand": "coefficient",
            "rr": boot.rr, "ci_low": boot.ci_low, "ci_high": boot.ci_high,
            "log_rr": boot.log_rr, "se_log_rr": boot.se_log_rr,
            "method": boot.method,
        })
    return estimates, warnings


def cmd_fit(args) -> int:
    data = csvio.read_csv_dataset(args.csv, args.outcome)
    spec_text = args.spec or _default_spec(data, args.exposure)
    terms = parse_spec(spec_text)
    design = build_design_matrix(data, terms, exposure=args.exposure)
    if not design.exposure_cols:
        raise SpecParseError(
            f"spec {spec_text!r} produces no columns for exposure {args.exposure!r}"
        )
    estimates, warnings = _fit_estimates(args, data, design, args.level)
    resolved = {
        "csv": args.csv, "outcome": args.outcome, "exposure": args.exposure,
        "spec": spec_text, "method": args.method, "estimand": args.estimand,
        "level": args.level, "boot": args.boot, "seed": args.seed,
        "format": args.format,
    }
    if args.format == "machine":
        envelope = {
            "version": VERSION,
            "command": "fit",
            "config": resolved,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "results": {"estimates": estimates, "n": data.n, "p": design.p},
            "warnings": warnings,
        }
        _emit(report.to_machine_json(envelope), args.out)
    else:
        lines = [f"riskratio fit  (v{VERSION})",
                 "config: " + " ".join(f"{k}={v}" for k, v in resolved.items()),
                 ""]
        lines.append(report.fit_table(estimates, args.level))
        for w in warnings:
            lines.append(f"warning: {w}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_study(args) -> int:
    with open(args.config, encoding="utf-8") as handle:
        config = simlab.parse_config(handle.read())
    payload = simlab.run_study(config, threads=args.threads)
    if args.format == "machine":
        _emit(report.to_machine_json(payload), args.out)
    else:
        _emit(report.study_table(payload), args.out)
    return EXIT_OK


def cmd_truth(args) -> int:
    result = simlab.monte_carlo_truth(args.scenario, n=args.n, seed=args.seed)
    sys.stdout.write(
        f"scenario={args.scenario} n={args.n} seed={args.seed}\n"
        f"rr_true = {result['rr_true']:.4f} +/- {result['mcse']:.4f} (MCSE)\n"
    )
    return EXIT_OK


def cmd_figure(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    demo = simlab.consistency_demo(
        sizes=sizes, replications=args.replications, seed=args.seed
    )
    lines = ["n,rr_hat,ci_low,ci_high"]
    for row in demo["rows"]:
        lines.append(
            f"{row['n']},{row['rr_hat']:.15g},{row['ci_low']:.15g},"
            f"{row['ci_high']:.15g}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.csv is None and args.config is None:
        raise ConfigError("validate needs --csv or --config")
    if args.csv is not None:
        if args.outcome is None:
            raise ConfigError("--outcome is required with --csv")
        data = csvio.read_csv_dataset(args.csv, args.outcome)
        sys.stdout.write(
            f"{args.csv}: ok ({data.n} rows, columns: "
            f"{', '.join(sorted(data.columns))})\n"
        )
    if args.config is not None:
        with open(args.config, encoding="utf-8") as handle:
            config = simlab.parse_config(handle.read())
        sys.stdout.write(f"{args.config}: ok (scenario={config.scenario})\n")
    return EXIT_OK


_COMMANDS = {
    "fit": cmd_fit,
    "study": cmd_study,
    "truth": cmd_truth,
    "figure": cmd_figure,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, SpecParseError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA
    except (RiskRatioError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
