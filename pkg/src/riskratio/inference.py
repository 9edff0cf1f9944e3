"""Risk-ratio estimands and intervals from fitted models.

Two estimands: the exponentiated coefficient (conditional RR from the
log-linear model) and the standardized marginal RR obtained by averaging
model-predicted risks over the estimation sample with the exposure forced
to each level (g-computation).  Intervals are Wald on the log scale, with
the delta method for the standardized estimand, plus a percentile
bootstrap cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats

from .data import Dataset
from .design import DesignMatrix, realize
from .eecore import FitResult
from .errors import NonFiniteStandardization, TooManyFailures
from .rng import stream


@dataclass(frozen=True)
class RREstimate:
    estimand: str
    log_rr: float
    se_log_rr: float
    rr: float
    ci_low: float
    ci_high: float
    method: str
    level: float = 0.95
    extra: dict | None = None


def _z(level: float) -> float:
    return float(scipy.stats.norm.ppf(0.5 + level / 2.0))


def coefficient_rr(fit: FitResult, j: int, level: float = 0.95) -> RREstimate:
    """RR = exp(beta_j) with a Wald sandwich interval on the log scale."""
    log_rr = float(fit.beta[j])
    se = float(np.sqrt(fit.cov_sandwich[j, j]))
    z = _z(level)
    return RREstimate(
        estimand=f"coefficient[{j}]",
        log_rr=log_rr,
        se_log_rr=se,
        rr=float(np.exp(log_rr)),
        ci_low=float(np.exp(log_rr - z * se)),
        ci_high=float(np.exp(log_rr + z * se)),
        method="wald-sandwich",
        level=level,
    )


def _standardized_means(fit: FitResult, data: Dataset, a: float):
    """Mean fitted risk with the exposure forced to level a, plus the
    gradient of its log w.r.t. beta."""
    design = fit.design
    Xa = realize(design, data.with_column(design.exposure, np.full(data.n, a)))
    eta = Xa @ fit.beta
    if np.any(eta > 700):
        raise NonFiniteStandardization("exp overflow during standardization")
    mu = np.exp(eta)
    total = mu.sum()
    grad = (Xa.T @ mu) / total
    return total / data.n, grad


def marginal_rr(
    fit: FitResult, data: Dataset, a1: float = 1.0, a0: float = 0.0,
    level: float = 0.95,
) -> RREstimate:
    """Standardized (marginal) RR with a delta-method sandwich interval.

    RR = mean_i exp(x_i(a1) beta) / mean_i exp(x_i(a0) beta), forcing the
    exposure to a1 / a0 while covariates keep their observed values.
    """
    if fit.design is None or fit.design.exposure is None:
        raise ValueError("fit carries no design/exposure; cannot standardize")
    m1, g1 = _standardized_means(fit, data, a1)
    m0, g0 = _standardized_means(fit, data, a0)
    log_rr = float(np.log(m1) - np.log(m0))
    g = g1 - g0
    se = float(np.sqrt(g @ fit.cov_sandwich @ g))
    z = _z(level)
    return RREstimate(
        estimand=f"marginal[{a1:g} vs {a0:g}]",
        log_rr=log_rr,
        se_log_rr=se,
        rr=float(np.exp(log_rr)),
        ci_low=float(np.exp(log_rr - z * se)),
        ci_high=float(np.exp(log_rr + z * se)),
        method="delta",
        level=level,
    )


def bootstrap_rr(
    fitter, data: Dataset, estimand, B: int = 1000, seed: int = 0,
    level: float = 0.95,
) -> RREstimate:
    """Nonparametric percentile bootstrap of any scalar RR estimand.

    ``fitter(dataset) -> fit`` and ``estimand(fit, dataset) -> RREstimate``
    are re-run on each resample.  Deterministic given ``seed``; resamples
    are aggregated in resample-index order.  More than 20% failed re-fits
    raises ``TooManyFailures``.
    """
    if B < 100:
        raise ValueError("B must be at least 100")
    try:
        point = estimand(fitter(data), data)
    except Exception as exc:
        # the full-sample fit itself fails; every resample is moot
        raise TooManyFailures(B, B) from exc
    log_rrs = np.full(B, np.nan)
    for b in range(B):
        rng = stream(seed, b)
        idx = rng.integers(0, data.n, size=data.n)
        sample = data.take(idx)
        try:
            log_rrs[b] = estimand(fitter(sample), sample).log_rr
        except Exception:
            continue
    ok = np.isfinite(log_rrs)
    failed = int(B - ok.sum())
    if failed > 0.2 * B:
        raise TooManyFailures(failed, B)
    alpha = 1.0 - level
    lo, hi = np.quantile(log_rrs[ok], [alpha / 2, 1 - alpha / 2])
    return RREstimate(
        estimand=point.estimand,
        log_rr=point.log_rr,
        se_log_rr=float(np.std(log_rrs[ok], ddof=1)),
        rr=point.rr,
        ci_low=float(np.exp(lo)),
        ci_high=float(np.exp(hi)),
        method=f"bootstrap({B})",
        level=level,
        extra={"failed_resamples": failed},
    )
