"""Maximum likelihood for the log-binomial model (binomial, log link).

The log link requires exp(x_i beta) <= 1, i.e. x_i beta <= 0, for every
observation.  Two fitters are provided: plain Newton with step halving and
step truncation at the feasibility boundary (the classic approach, which
stalls when the optimum sits on the boundary), and a log-barrier method
that shrinks the barrier weight toward zero.  Non-convergence is an
expected outcome for this model, reported via the ``converged`` flag and
``failure_reason`` rather than an exception.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .design import DesignMatrix
from .errors import InfeasiblePoint, NoFeasibleStart
from . import eecore

ETA_CAP = -1e-10        # accepted iterates keep max_i x_i beta <= this
BOUNDARY_EPS = 1e-6     # max eta above -BOUNDARY_EPS counts as on-boundary
GRAD_TOL = 1e-8         # per-observation, like the estimating equations
MAX_ITER = 100
MAX_HALVINGS = 30

BARRIER_T_START = 1.0
BARRIER_T_STOP = 1e-8
BARRIER_T_FACTOR = 0.1


@dataclass
class LogBinFit:
    beta: np.ndarray
    cov_model: np.ndarray | None
    converged: bool
    on_boundary: bool
    loglik: float
    iterations: int
    failure_reason: str | None = None
    design: DesignMatrix | None = field(default=None, repr=False)

    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov_model))


def _eta(X, beta):
    return X @ beta


def logbin_loglik(X, y, beta) -> float:
    """sum_i [y_i eta_i + (1 - y_i) log(1 - exp(eta_i))], eta = X beta."""
    eta = _eta(X, beta)
    if np.any(eta > 0):
        raise InfeasiblePoint("some x_i'beta > 0")
    with np.errstate(divide="ignore"):
        log1mexp = np.where(eta < 0, np.log(-np.expm1(np.minimum(eta, -1e-300))), -np.inf)
    return float(np.sum(y * eta + (1 - y) * log1mexp))


def logbin_gradient(X, y, beta) -> np.ndarray:
    eta = _eta(X, beta)
    if np.any(eta > 0):
        raise InfeasiblePoint("some x_i'beta > 0")
    # d/d eta: y - (1-y) e^eta / (1 - e^eta)
    q = np.exp(eta) / (-np.expm1(eta))
    return X.T @ (y - (1 - y) * q)


def logbin_hessian(X, y, beta) -> np.ndarray:
    eta = _eta(X, beta)
    q = np.exp(eta) / (-np.expm1(eta))
    h = (1 - y) * q * (1 + q)   # e^eta/(1-e^eta)^2 = q(1+q)
    return -(X.T * h) @ X


def _truncate_step(eta, direction_eta, cap=ETA_CAP, frac=1.0):
    """Largest step alpha <= 1 with eta + alpha*direction <= cap everywhere."""
    rising = direction_eta > 0
    if not np.any(rising):
        return 1.0
    alpha = np.min((cap - eta[rising]) / direction_eta[rising])
    return min(1.0, frac * max(alpha, 0.0))


def feasible_start(X, y) -> np.ndarray:
    """Strictly feasible beta: intercept at log(ybar), or a boundary-shifted
    robust Poisson fit when the design has no plain intercept column."""
    n, p = X.shape
    ybar = float(np.mean(y))
    intercept = np.flatnonzero(np.all(X == 1.0, axis=0))
    if intercept.size and 0.0 < ybar < 1.0:
        beta = np.zeros(p)
        beta[intercept[0]] = np.log(ybar)
        return beta
    if intercept.size:
        beta = np.zeros(p)
        beta[intercept[0]] = np.log(max(min(ybar, 1 - 1.0 / (2 * n)), 1.0 / (2 * n)))
        return beta
    try:
        fit = eecore.fit_robust_poisson(X, y)
        beta = fit.beta.copy()
        shift = np.max(X @ beta) + 0.1
        if shift > 0:
            # shrink toward zero until feasible; works without an intercept
            scale = 1.0
            while np.max(X @ (beta * scale)) > -0.01 and scale > 1e-8:
                scale /= 2.0
            beta = beta * scale
        if np.max(X @ beta) < 0:
            return beta
    except Exception:
        pass
    raise NoFeasibleStart("could not construct a strictly feasible start")


def _finish(X, y, beta, converged, on_boundary, iterations, reason, dm):
    try:
        ll = logbin_loglik(X, y, beta)
    except InfeasiblePoint:
        ll = -np.inf
    cov = None
    try:
        hess = logbin_hessian(X, y, beta)
        cov = scipy.linalg.inv(-hess)
        if not np.all(np.isfinite(cov)):
            cov = None
    except Exception:
        cov = None
    if converged and cov is None:
        converged, reason = False, "non-finite covariance"
    return LogBinFit(
        beta=beta,
        cov_model=cov,
        converged=converged,
        on_boundary=on_boundary,
        loglik=ll,
        iterations=iterations,
        failure_reason=reason,
        design=dm,
    )


def fit_logbin_ml(design, y, max_iter: int = MAX_ITER) -> LogBinFit:
    """Fisher-scoring IRLS for the log-binomial model, GLM style.

    Deliberately mirrors the standard unsafeguarded GLM iteration: the
    weighted least-squares update is unconstrained, and the fit fails the
    moment an iterate lands outside the feasible region (some fitted
    probability reaching 1).  This is the classic failure mode of
    log-binomial maximum likelihood when the optimum is on or near the
    boundary; it is reported via ``converged``/``failure_reason``, never
    raised.  The barrier fitter is the safeguarded alternative.
    """
    X = design.X if isinstance(design, DesignMatrix) else np.asarray(design, float)
    dm = design if isinstance(design, DesignMatrix) else None
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    tol = GRAD_TOL * n

    # GLM-style start: mu = (y + 1/2)/2, always strictly feasible for 0/1 y
    mu = (y + 0.5) / 2.0
    eta = np.log(mu)
    beta = None
    last_feasible = feasible_start(X, y)

    for it in range(1, max_iter + 1):
        w = mu / (1.0 - mu)          # (dmu/deta)^2 / var for the log link
        z = eta + (y - mu) / mu
        xtw = X.T * w
        try:
            beta = scipy.linalg.solve(xtw @ X, xtw @ z, assume_a="pos")
        except scipy.linalg.LinAlgError:
            return _finish(X, y, last_feasible, False, True, it,
                           "singular weighted least squares", dm)
        eta = X @ beta
        if np.max(eta) >= ETA_CAP:
            # iterate crossed the boundary; the usual algorithm has no
            # recovery, report non-convergence at the last feasible point
            return _finish(X, y, last_feasible, False, True, it,
                           "infeasible iterate", dm)
        mu = np.exp(eta)
        last_feasible = beta
        if np.max(np.abs(logbin_gradient(X, y, beta))) < tol:
            return _finish(X, y, beta, True, np.max(eta) > -BOUNDARY_EPS, it, None, dm)

    return _finish(X, y, last_feasible, False,
                   np.max(_eta(X, last_feasible)) > -BOUNDARY_EPS,
                   max_iter, "iteration cap", dm)


def fit_logbin_barrier(design, y, max_iter: int = MAX_ITER) -> LogBinFit:
    """Log-barrier maximization of the log-binomial likelihood.

    Maximizes loglik(beta) + t * sum_i log(-x_i'beta) for a decreasing
    schedule of t, warm-starting each stage; iterates stay strictly
    feasible, so the method handles boundary optima that defeat plain
    Newton.
    """
    X = design.X if isinstance(design, DesignMatrix) else np.asarray(design, float)
    dm = design if isinstance(design, DesignMatrix) else None
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    beta = feasible_start(X, y)
    total_iter = 0

    t = BARRIER_T_START
    while t >= BARRIER_T_STOP * 0.999:
        for _ in range(max_iter):
            total_iter += 1
            eta = _eta(X, beta)
            grad = logbin_gradient(X, y, beta) + t * (X.T @ (1.0 / eta))
            hess = logbin_hessian(X, y, beta) - t * ((X.T * (1.0 / eta**2)) @ X)
            try:
                delta = scipy.linalg.solve(-hess, grad, assume_a="pos")
            except scipy.linalg.LinAlgError:
                delta = scipy.linalg.lstsq(-hess, grad)[0]
            alpha = _truncate_step(eta, X @ delta, cap=0.0, frac=0.99)
            if alpha <= 1e-16:
                break
            obj = logbin_loglik(X, y, beta) + t * np.sum(np.log(-eta))
            accepted = False
            for _ in range(MAX_HALVINGS + 1):
                candidate = beta + alpha * delta
                eta_c = _eta(X, candidate)
                if np.max(eta_c) >= 0:
                    alpha /= 2.0
                    continue
                obj_c = logbin_loglik(X, y, candidate) + t * np.sum(np.log(-eta_c))
                if obj_c >= obj - 1e-12:
                    accepted = True
                    break
                alpha /= 2.0
            if not accepted:
                break
            step = np.max(np.abs(alpha * delta))
            beta = candidate
            if step < 1e-12 or np.max(np.abs(grad)) < GRAD_TOL * n:
                break
        t *= BARRIER_T_FACTOR

    eta = _eta(X, beta)
    on_boundary = np.max(eta) > -BOUNDARY_EPS * 10
    grad = logbin_gradient(X, y, beta)
    converged = bool(np.max(np.abs(grad)) < 1e-4 * n or on_boundary)
    reason = None if converged else "barrier did not reach stationarity"
    return _finish(X, y, beta, converged, on_boundary, total_iter, reason, dm)
