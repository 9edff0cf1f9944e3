"""Semiparametric log-linear estimating equations and sandwich covariance.

Fits log E[Y|X] = X beta by solving sum_i M_i (y_i - exp(x_i beta)) = 0
with the default instrument M_i = x_i, i.e. the score equations of a
Poisson regression -- but no outcome distribution is assumed.  The
covariance is the sandwich B^{-1} W B^{-T} with bread
B = sum_i M_i x_i' mu_i and meat W = sum_i M_i (y_i - mu_i)^2 M_i',
which is valid under arbitrary misspecification of the outcome
distribution as long as the log-linear mean model holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .design import DesignMatrix
from .errors import NonConvergence, Overflow, SingularBread, SingularJacobian

# Linear predictors beyond this overflow exp(); iterates are step-halved
# away from this region rather than clamped.
ETA_MAX = 700.0

SCORE_TOL = 1e-8     # per-observation: converged when ||score||_inf < tol * n
STEP_TOL = 1e-10
MAX_ITER = 100
MAX_HALVINGS = 30
COND_MAX = 1e12


@dataclass
class FitResult:
    """Solution of the estimating equations plus diagnostics."""

    beta: np.ndarray
    cov_sandwich: np.ndarray
    converged: bool
    iterations: int
    max_abs_score: float
    mu_hat: np.ndarray
    n_mu_gt1: int
    condition_estimate: float
    degenerate_outcome: bool = False
    design: DesignMatrix | None = field(default=None, repr=False)

    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov_sandwich))


def _mu(X, beta):
    eta = X @ beta
    if np.any(eta > ETA_MAX):
        raise Overflow("linear predictor overflow")
    return np.exp(eta)


def ee_score(X, y, beta, M=None) -> np.ndarray:
    """Estimating function sum_i M_i (y_i - exp(x_i beta))."""
    M = X if M is None else M
    return M.T @ (y - _mu(X, beta))


def ee_jacobian(X, y, beta, M=None) -> np.ndarray:
    """Derivative of the score w.r.t. beta: -sum_i M_i x_i' exp(x_i beta)."""
    M = X if M is None else M
    return -(M.T * _mu(X, beta)) @ X


def poisson_loglik(X, y, beta) -> float:
    """Poisson log-likelihood; for 0/1 outcomes the log(y!) term vanishes.

    Diagnostic only: the estimator does not rely on the Poisson
    distribution, but shares its score function.
    """
    eta = X @ beta
    if np.any(eta > ETA_MAX):
        raise Overflow("linear predictor overflow")
    return float(np.sum(y * eta - np.exp(eta)))


def _solve_newton_step(jac, score):
    """Solve -J d = s, preferring Cholesky on the symmetric -J."""
    neg_jac = -jac
    try:
        c, low = scipy.linalg.cho_factor(neg_jac)
        return scipy.linalg.cho_solve((c, low), score)
    except scipy.linalg.LinAlgError:
        return scipy.linalg.lu_solve(scipy.linalg.lu_factor(neg_jac), score)


def _initial_beta(X, y):
    """Zeros except an intercept at log(max(ybar, 1/(2n)))."""
    n, p = X.shape
    beta = np.zeros(p)
    intercept = np.flatnonzero(np.all(X == 1.0, axis=0))
    if intercept.size:
        beta[intercept[0]] = np.log(max(y.mean(), 1.0 / (2 * n)))
    return beta


def fit_robust_poisson(
    design: DesignMatrix | np.ndarray,
    y,
    M=None,
    solver: str = "newton",
    max_iter: int = MAX_ITER,
) -> FitResult:
    """Solve the log-linear estimating equations and attach the sandwich.

    ``solver`` is "newton" (damped Newton on the estimating function) or
    "irls" (iteratively reweighted least squares with weights exp(x beta));
    both reach the same solution and the agreement is a tested invariant.
    """
    X = design.X if isinstance(design, DesignMatrix) else np.asarray(design, float)
    dm = design if isinstance(design, DesignMatrix) else None
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if p > n:
        raise ValueError(f"p={p} parameters with only n={n} observations")

    # All-equal outcome: the score cannot vanish off the boundary, so
    # report the degenerate closed form instead of iterating.
    if np.all(y == y[0]) and p == 1 and np.all(X == 1.0):
        ybar = float(y[0])
        beta = np.array([np.log(ybar) if ybar > 0 else -np.inf])
        mu = np.full(n, ybar)
        return FitResult(
            beta=beta,
            cov_sandwich=np.zeros((1, 1)),
            converged=True,
            iterations=0,
            max_abs_score=0.0,
            mu_hat=mu,
            n_mu_gt1=0,
            condition_estimate=1.0,
            degenerate_outcome=True,
            design=dm,
        )

    beta = _initial_beta(X, y)
    tol = SCORE_TOL * n
    iterations = 0
    converged = False
    score = ee_score(X, y, beta, M)

    for iterations in range(1, max_iter + 1):
        jac = ee_jacobian(X, y, beta, M)
        cond = np.linalg.cond(-jac)
        if not np.isfinite(cond) or cond > COND_MAX:
            raise SingularJacobian(cond)
        if solver == "newton":
            delta = _solve_newton_step(jac, score)
        elif solver == "irls":
            # Weighted LS update: beta <- solve(X'WX, X'W z), W = diag(mu),
            # z = eta + (y - mu)/mu.  Algebraically the same Newton step
            # when M = X.
            mu = _mu(X, beta)
            z = X @ beta + (y - mu) / mu
            xtw = X.T * mu
            delta = scipy.linalg.solve(xtw @ X, xtw @ z, assume_a="pos") - beta
        else:
            raise ValueError(f"unknown solver {solver!r}")

        # Step halving: accept the first step that reduces ||score||_inf
        # (or keeps the linear predictor finite).
        norm0 = np.max(np.abs(score))
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = beta + step * delta
            try:
                new_score = ee_score(X, y, candidate, M)
            except Overflow:
                step /= 2.0
                continue
            if np.max(np.abs(new_score)) < norm0 or norm0 < tol:
                break
            step /= 2.0
        else:
            raise Overflow("step halving exhausted without progress")

        beta = candidate
        score = new_score
        if np.max(np.abs(score)) < tol and np.max(np.abs(step * delta)) < STEP_TOL:
            converged = True
            break

    max_abs_score = float(np.max(np.abs(score)))
    if not converged:
        raise NonConvergence(iterations, max_abs_score)

    mu = _mu(X, beta)
    cov = sandwich_covariance(X, y, beta, M)
    return FitResult(
        beta=beta,
        cov_sandwich=cov,
        converged=True,
        iterations=iterations,
        max_abs_score=max_abs_score,
        mu_hat=mu,
        n_mu_gt1=int(np.sum(mu > 1.0)),
        condition_estimate=float(np.linalg.cond(-ee_jacobian(X, y, beta, M))),
        design=dm,
    )


def sandwich_covariance(X, y, beta, M=None) -> np.ndarray:
    """Robust covariance B^{-1} W B^{-T} of the coefficient estimates.

    B = sum_i M_i x_i' mu_i (bread), W = sum_i M_i r_i^2 M_i' (meat) with
    residual r_i = y_i - mu_i.  Symmetrized after assembly.
    """
    X = X.X if isinstance(X, DesignMatrix) else np.asarray(X, float)
    M = X if M is None else M
    mu = _mu(X, beta)
    r = y - mu
    bread = (M.T * mu) @ X
    meat = (M.T * r**2) @ M
    try:
        binv = scipy.linalg.inv(bread)
    except scipy.linalg.LinAlgError:
        raise SingularBread("bread matrix not invertible") from None
    cov = binv @ meat @ binv.T
    return (cov + cov.T) / 2.0


def sandwich_covariance_lz(X, y, beta) -> np.ndarray:
    """Sandwich assembled in the Liang-Zeger GEE form.

    Uses per-observation mean derivatives d_i = x_i mu_i and explicit
    1/mu_i working-variance factors: bread sum_i d_i mu_i^{-1} d_i',
    meat sum_i d_i mu_i^{-1} r_i^2 mu_i^{-1} d_i'.  Algebraically equal
    to ``sandwich_covariance``; kept as an independent assembly for
    verification.
    """
    X = X.X if isinstance(X, DesignMatrix) else np.asarray(X, float)
    mu = _mu(X, beta)
    r = y - mu
    d = X * mu[:, None]
    bread = (d.T / mu) @ d
    meat = (d.T * (r**2 / mu**2)) @ d
    binv = scipy.linalg.inv(bread)
    cov = binv @ meat @ binv.T
    return (cov + cov.T) / 2.0
