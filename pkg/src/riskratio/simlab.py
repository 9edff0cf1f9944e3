"""Simulation scenarios, Monte Carlo truth, and the replication study runner.

Three data-generating scenarios of increasing covariate complexity (binary
covariates; polynomial terms; non-polynomial transforms) plus a small
log-linear demo process used for the consistency figure.  The study runner
replays R independent replications, fits each requested method and model
specification, and reports bias, RMSE and CI coverage of the risk-ratio
estimates against a Monte Carlo truth computed from counterfactual
outcomes, with Monte Carlo standard errors for every metric.

Determinism: replication r draws from ``rng.stream(base_seed, r)``; the
truth simulation uses a reserved stream index.  Reports are identical
regardless of thread count or execution order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import inference
from .data import Dataset
from .design import build_design_matrix, parse_spec
from .eecore import fit_robust_poisson
from .errors import AllReplicationsFailed, ConfigError, RiskRatioError
from .logbin import fit_logbin_barrier, fit_logbin_ml
from .rng import stream

# Stream indices reserved for non-replication draws.
TRUTH_STREAM = 1 << 48

VERSION = "0.1.0"


def expit(x):
    """Numerically stable 1/(1+exp(-x)), split on the sign of x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Scenario:
    """One data-generating process: covariates, exposure model, outcome model."""

    name: str
    covariates: tuple[str, ...]
    simple_spec: str
    rich_spec: str

    def gen_covariates(self, rng, n) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def p_exposure(self, cols) -> np.ndarray:
        raise NotImplementedError

    def p_outcome(self, a, cols) -> np.ndarray:
        raise NotImplementedError


class _Simple(Scenario):
    def gen_covariates(self, rng, n):
        return {
            "L1": (rng.random(n) < 0.5).astype(float),
            "L2": (rng.random(n) < 0.25).astype(float),
        }

    def p_exposure(self, c):
        return expit(-0.2 + 0.4 * c["L1"] + 0.3 * c["L2"])

    def p_outcome(self, a, c):
        return expit(-0.4 + 0.5 * a - 0.5 * c["L1"] - 0.2 * c["L2"])


class _Moderate(Scenario):
    def gen_covariates(self, rng, n):
        return {"L1": rng.standard_normal(n), "L2": rng.standard_normal(n)}

    def p_exposure(self, c):
        l1, l2 = c["L1"], c["L2"]
        return expit(
            -0.2 + 0.3 * l1 + 0.2 * l1**2 + 0.1 * l1**3
            + 0.3 * l2 - 0.2 * l2**2
            - 0.3 * l1 * l2 + 0.2 * l1**2 * l2 - 0.2 * l1 * l2**2
        )

    def p_outcome(self, a, c):
        l1, l2 = c["L1"], c["L2"]
        return expit(
            -0.4 + 0.5 * a - 0.5 * l1 - 0.2 * l1**2
            - 0.2 * l2 + 0.1 * l2**2 + 0.1 * l2**3 + 0.5 * l1 * l2
        )


class _Complex(Scenario):
    def gen_covariates(self, rng, n):
        return {"L1": rng.standard_normal(n), "L2": rng.standard_normal(n)}

    def p_exposure(self, c):
        l1, l2 = c["L1"], c["L2"]
        return expit(
            -0.2 + 2 * np.sin(l1) + np.abs(np.sin(l2))
            - 0.3 * np.abs(l1) * np.cos(l2)
        )

    def p_outcome(self, a, c):
        l1, l2 = c["L1"], c["L2"]
        return expit(
            -0.4 + 0.5 * a - 2 * np.sin(l1) - np.abs(l2) + np.abs(l1) * np.sin(l2)
        )


class _FigureDemo(Scenario):
    """Log-linear demo process for the consistency figure.

    Coefficients are chosen so exp(x beta) is a valid probability for
    every covariate/exposure combination; the exposure log-RR is 0.3
    (RR = exp(0.3), exactly collapsible since the model has no
    exposure-covariate interaction).
    """

    def gen_covariates(self, rng, n):
        return {"L1": (rng.random(n) < 0.5).astype(float)}

    def p_exposure(self, c):
        return np.full_like(c["L1"], 0.55)

    def p_outcome(self, a, c):
        return np.exp(-1.5 + 0.3 * a + 0.9 * c["L1"])


SCENARIOS: dict[str, Scenario] = {
    "simple": _Simple(
        "simple", ("L1", "L2"),
        simple_spec="1 + A + L1 + L2",
        rich_spec="1 + A + L1 + L2 + L1:L2",
    ),
    "moderate": _Moderate(
        "moderate", ("L1", "L2"),
        simple_spec="1 + A + L1 + L2",
        rich_spec="1 + A + rcs(L1,4) + rcs(L2,4) + L1:L2",
    ),
    "complex": _Complex(
        "complex", ("L1", "L2"),
        simple_spec="1 + A + L1 + L2",
        rich_spec="1 + A + rcs(L1,4) + rcs(L2,4) + L1:L2",
    ),
    "figure-demo": _FigureDemo(
        "figure-demo", ("L1",),
        simple_spec="1 + A + L1",
        rich_spec="1 + A + L1",
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}",
            key="scenario",
        ) from None


def generate(scenario: Scenario | str, n: int, seed=None, rng=None) -> Dataset:
    """Draw one dataset from a scenario; deterministic given (scenario, n, seed)."""
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    if rng is None:
        rng = stream(0 if seed is None else seed, 0)
    cols = scenario.gen_covariates(rng, n)
    a = (rng.random(n) < scenario.p_exposure(cols)).astype(float)
    y = (rng.random(n) < scenario.p_outcome(a, cols)).astype(float)
    cols["A"] = a
    return Dataset(y=y, columns=cols)


def monte_carlo_truth(scenario: Scenario | str, n: int = 1_000_000, seed: int = 0) -> dict:
    """True marginal RR by counterfactual simulation.

    Draws n covariate vectors, generates counterfactual outcomes under
    exposure and no exposure (independent Bernoulli draws given their
    probabilities), and returns mean(Y1)/mean(Y0) with a delta-method MCSE.
    """
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    rng = stream(seed, TRUTH_STREAM)
    cols = scenario.gen_covariates(rng, n)
    p1 = scenario.p_outcome(1.0, cols)
    p0 = scenario.p_outcome(0.0, cols)
    y1 = (rng.random(n) < p1).astype(float)
    y0 = (rng.random(n) < p0).astype(float)
    m1, m0 = y1.mean(), y0.mean()
    rr = m1 / m0
    v1, v0 = y1.var(ddof=1), y0.var(ddof=1)
    mcse = rr * np.sqrt(v1 / (n * m1**2) + v0 / (n * m0**2))
    return {"rr_true": float(rr), "mcse": float(mcse),
            "mean_y1": float(m1), "mean_y0": float(m0), "n": n}


# --- study runner -----------------------------------------------------------

METHODS = ("robust-poisson", "logbin-ml", "logbin-ab")
SPECIFICATIONS = ("simple", "rich")
ESTIMANDS = ("coefficient", "marginal")


@dataclass(frozen=True)
class StudyConfig:
    scenario: str
    n: int = 1000
    replications: int = 1000
    base_seed: int = 0
    methods: tuple[str, ...] = ("robust-poisson",)
    specifications: tuple[str, ...] = ("simple",)
    estimands: tuple[str, ...] = ("coefficient", "marginal")
    bootstrap_B: int = 0
    level: float = 0.95
    truth_n: int = 1_000_000

    def __post_init__(self):
        get_scenario(self.scenario)
        if self.replications < 1:
            raise ConfigError("must be >= 1", key="replications")
        if self.n < 1:
            raise ConfigError("must be >= 1", key="n")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}", key="methods")
        for s in self.specifications:
            if s not in SPECIFICATIONS:
                raise ConfigError(f"unknown specification {s!r}", key="specifications")
        for e in self.estimands:
            if e not in ESTIMANDS:
                raise ConfigError(f"unknown estimand {e!r}", key="estimands")


_CONFIG_KEYS = {
    "scenario": str,
    "n": int,
    "replications": int,
    "base_seed": int,
    "methods": None,
    "specifications": None,
    "estimands": None,
    "bootstrap.B": int,
    "level": float,
    "truth_n": int,
}


def parse_config(text: str) -> StudyConfig:
    """Parse the flat key=value study config format."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError("unknown key", key=key)
        if key in values:
            raise ConfigError("duplicate key", key=key)
        values[key] = value
    if "scenario" not in values:
        raise ConfigError("required", key="scenario")
    kwargs = {"scenario": values.pop("scenario")}
    for key, value in values.items():
        cast = _CONFIG_KEYS[key]
        if cast is None:
            kwargs[key.replace(".", "_")] = tuple(
                part.strip() for part in value.split(",") if part.strip()
            )
        else:
            try:
                kwargs[key.replace(".", "_")] = cast(value)
            except ValueError:
                raise ConfigError(f"cannot parse {value!r}", key=key) from None
    return StudyConfig(**kwargs)


def _spec_terms(scenario: Scenario, spec_name: str):
    text = scenario.simple_spec if spec_name == "simple" else scenario.rich_spec
    return parse_spec(text)


def _replicate(config: StudyConfig, scenario: Scenario, r: int) -> dict:
    """One replication: returns {(method, spec, estimand): (rr, lo, hi) | None}."""
    rng = stream(config.base_seed, r)
    data = generate(scenario, config.n, rng=rng)
    out = {}
    for spec_name in config.specifications:
        try:
            design = build_design_matrix(
                data, _spec_terms(scenario, spec_name), exposure="A"
            )
        except RiskRatioError:
            for method in config.methods:
                for est in config.estimands:
                    out[(method, spec_name, est)] = None
            continue
        j = design.exposure_cols[0]
        for method in config.methods:
            beta = cov = fit = None
            try:
                if method == "robust-poisson":
                    fit = fit_robust_poisson(design, data.y)
                    beta, cov = fit.beta, fit.cov_sandwich
                else:
                    fitter = fit_logbin_ml if method == "logbin-ml" else fit_logbin_barrier
                    lb = fitter(design, data.y)
                    failed = (
                        not lb.converged or lb.cov_model is None or lb.on_boundary
                    )
                    if not failed:
                        beta, cov = lb.beta, lb.cov_model
            except RiskRatioError:
                beta = None
            except np.linalg.LinAlgError:
                beta = None
            for est in config.estimands:
                if beta is None:
                    out[(method, spec_name, est)] = None
                    continue
                try:
                    if est == "coefficient":
                        z = inference._z(config.level)
                        se = float(np.sqrt(cov[j, j]))
                        rr = float(np.exp(beta[j]))
                        lo = float(np.exp(beta[j] - z * se))
                        hi = float(np.exp(beta[j] + z * se))
                    else:
                        est_obj = inference.marginal_rr(
                            _as_fit(beta, cov, design), data, 1.0, 0.0,
                            level=config.level,
                        )
                        rr, lo, hi = est_obj.rr, est_obj.ci_low, est_obj.ci_high
                    if not (np.isfinite(rr) and np.isfinite(lo) and np.isfinite(hi)):
                        out[(method, spec_name, est)] = None
                    else:
                        out[(method, spec_name, est)] = (rr, lo, hi)
                except RiskRatioError:
                    out[(method, spec_name, est)] = None
    return out


def _as_fit(beta, cov, design):
    """Minimal FitResult wrapper so marginal_rr works for any method."""
    from .eecore import FitResult

    return FitResult(
        beta=beta, cov_sandwich=cov, converged=True, iterations=0,
        max_abs_score=0.0, mu_hat=np.empty(0), n_mu_gt1=0,
        condition_estimate=0.0, design=design,
    )


def _cell_metrics(values, truth, level):
    """Bias/RMSE/coverage with MCSEs over non-failed replications."""
    R = len(values)
    ok = [v for v in values if v is not None]
    failures = R - len(ok)
    cell = {"replications": R, "failures": failures,
            "r_effective": len(ok), "na": failures > 0.5 * R or not ok}
    if cell["na"]:
        return cell
    rr = np.array([v[0] for v in ok])
    covered = np.array([v[1] <= truth <= v[2] for v in ok], dtype=float)
    bias = float(rr.mean() - truth)
    var = float(rr.var(ddof=1)) if len(ok) > 1 else 0.0
    sd = np.sqrt(var)
    cover = float(covered.mean())
    r_eff = len(ok)
    cell.update(
        bias=bias,
        rmse=float(np.sqrt(bias**2 + var)),
        coverage=100.0 * cover,
        mcse_bias=float(sd / np.sqrt(r_eff)),
        mcse_rmse=float(sd / np.sqrt(2.0 * r_eff)),
        mcse_coverage=float(100.0 * np.sqrt(cover * (1 - cover) / r_eff)),
        mean_rr=float(rr.mean()),
        sd_rr=float(sd),
    )
    return cell


def run_study(config: StudyConfig, threads: int = 1) -> dict:
    """Run the full replication study and aggregate Table-1-style metrics.

    Returns a plain dict (the machine report payload): config echo, truth,
    and one metrics cell per (method, specification, estimand).  Identical
    output for any ``threads`` value.
    """
    scenario = get_scenario(config.scenario)
    truth = monte_carlo_truth(scenario, config.truth_n, seed=config.base_seed)

    indices = range(config.replications)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _replicate(config, scenario, r), indices))
    else:
        results = [_replicate(config, scenario, r) for r in indices]

    cells = []
    any_ok = False
    for method in config.methods:
        for spec_name in config.specifications:
            for est in config.estimands:
                key = (method, spec_name, est)
                values = [res[key] for res in results]
                cell = _cell_metrics(values, truth["rr_true"], config.level)
                if cell["r_effective"] > 0:
                    any_ok = True
                cell.update(method=method, specification=spec_name, estimand=est)
                cells.append(cell)
    if not any_ok:
        raise AllReplicationsFailed("no cell produced any successful replication")

    return {
        "version": VERSION,
        "config": {
            "scenario": config.scenario,
            "n": config.n,
            "replications": config.replications,
            "base_seed": config.base_seed,
            "methods": list(config.methods),
            "specifications": list(config.specifications),
            "estimands": list(config.estimands),
            "bootstrap.B": config.bootstrap_B,
            "level": config.level,
            "truth_n": config.truth_n,
        },
        "truth": truth,
        "cells": cells,
    }


def consistency_demo(
    sizes=(10, 25, 50, 100, 250, 500, 1000, 2000),
    replications: int = 200,
    seed: int = 0,
) -> dict:
    """Mean RR estimate and CI across sample sizes for the demo process.

    For each size, fits the exposure model on ``replications`` independent
    datasets; non-convergent small-sample fits are skipped, not fatal.
    """
    sizes = tuple(sizes)
    if list(sizes) != sorted(sizes):
        raise ConfigError("sizes must be ascending", key="sizes")
    scenario = get_scenario("figure-demo")
    truth = monte_carlo_truth(scenario, seed=seed)
    terms = parse_spec(scenario.simple_spec)
    rows = []
    for s, n in enumerate(sizes):
        rrs, los, his = [], [], []
        for r in range(replications):
            rng = stream(seed, (s << 32) | r)
            data = generate(scenario, n, rng=rng)
            try:
                design = build_design_matrix(data, terms, exposure="A")
                fit = fit_robust_poisson(design, data.y)
                est = inference.coefficient_rr(fit, design.exposure_cols[0])
            except RiskRatioError:
                continue
            if np.isfinite(est.rr) and np.isfinite(est.ci_low) and np.isfinite(est.ci_high):
                rrs.append(est.rr)
                los.append(est.ci_low)
                his.append(est.ci_high)
        if not rrs:
            continue
        rr = np.array(rrs)
        rows.append({
            "n": n,
            "rr_hat": float(rr.mean()),
            "ci_low": float(np.mean(los)),
            "ci_high": float(np.mean(his)),
            "mean_abs_error": float(np.mean(np.abs(rr - truth["rr_true"]))),
            "mean_ci_width": float(np.mean(np.array(his) - np.array(los))),
            "n_converged": len(rrs),
        })
    return {"truth": truth, "rows": rows}
