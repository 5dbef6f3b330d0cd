"""Outer fits: least squares, the lambda-bridged estimator family, the
errors-in-variables special case, and density-power-divergence regression.

All fits use the linear predictor <x, theta>.  Every iterative solver
starts from the least-squares solution, so the bridge family is continuous
in lambda through lambda = 0, where it *is* least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SolverError
from .losses import (
    covariate_optimistic_loss,
    covariate_pessimistic_loss,
    ols_loss,
    outcome_optimistic_loss,
)
from .solvers import (
    backtracking_gradient_descent,
    damped_newton,
    irls_weighted_ls,
    solve_normal_equations,
)
from .synth import Dataset

# the bridge maps lambda > 0 to the outcome-optimistic budget tau = 25 * lambda
BRIDGE_TAU_PER_LAMBDA = 25.0


@dataclass(frozen=True)
class FitResult:
    """A fitted coefficient vector with solver diagnostics."""

    theta_hat: np.ndarray
    loss_value: float
    iterations: int
    converged: bool
    solver: str


@dataclass(frozen=True)
class DpdSpec:
    """Density-power-divergence exponent and the (given) outcome noise scale.

    beta_exp = 0 is maximum likelihood; beta_exp = -1 would be the
    Itakura-Saito limit, whose Gaussian power integral no longer exists.
    """

    beta_exp: float
    sigma_y: float

    def __post_init__(self):
        if not (self.sigma_y > 0):
            raise ConfigError(f"sigma_y must be positive, got {self.sigma_y}")


def fit_ols(data: Dataset) -> FitResult:
    """Least squares through the normal equations (no pseudo-inverse fallback)."""
    theta = solve_normal_equations(data.X, data.y)
    return FitResult(
        theta_hat=theta,
        loss_value=ols_loss(theta, data),
        iterations=0,
        converged=True,
        solver="normal_equations",
    )


def fit_outcome_optimistic(
    data: Dataset,
    tau: float,
    *,
    tol: float = 1e-9,
    max_iter: int = 10000,
    trace: list | None = None,
) -> FitResult:
    """Minimize the (1,1) outcome-optimistic loss by block alternation.

    Alternates an exact slack update (per-coordinate soft threshold at
    1/(2*tau)) with least squares on the slack-corrected outcomes; the joint
    objective is convex, so the alternation descends to the global minimum.
    ``trace``, if given, collects the joint objective once per iteration.
    """
    if not (tau > 0):
        raise ConfigError(f"tau must be positive, got {tau}")
    X, y = data.X, data.y
    theta = solve_normal_equations(X, y)
    XtX = X.T @ X
    thresh = 1.0 / (2.0 * tau)
    mu = np.zeros(data.n)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        e = y - X @ theta
        mu = -np.sign(e) * np.maximum(np.abs(e) - thresh, 0.0)
        theta_new = np.linalg.solve(XtX, X.T @ (y + mu))
        if trace is not None:
            r = y + mu - X @ theta_new
            trace.append(float(np.mean(r**2) + np.mean(np.abs(mu)) / tau))
        delta = float(np.linalg.norm(theta_new - theta))
        theta = theta_new
        if delta <= tol:
            converged = True
            break
    value = outcome_optimistic_loss(theta, data, 1.0, 1.0, tau).value
    return FitResult(theta, value, it, converged, solver="block_alternation")


def fit_huber(data: Dataset, eta: float, *, tol: float = 1e-12, max_iter: int = 10000) -> FitResult:
    """Minimize the mean Huber loss of the residuals at threshold eta by IRLS."""
    if not (eta > 0):
        raise ConfigError(f"eta must be positive, got {eta}")
    theta0 = solve_normal_equations(data.X, data.y)

    def weights(r: np.ndarray) -> np.ndarray:
        a = np.abs(r)
        return np.where(a <= eta, 1.0, eta / np.maximum(a, 1e-300))

    theta, it, converged = irls_weighted_ls(data.X, data.y, weights, theta0, tol=tol, max_iter=max_iter)
    from .losses import huber_objective

    return FitResult(theta, huber_objective(theta, data, eta), it, converged, solver="irls")


def _inf_norm_subgrad(theta: np.ndarray) -> np.ndarray:
    """Subgradient of the sup norm that picks the lowest maximizing index."""
    g = np.zeros_like(theta)
    if not np.any(theta):
        return g
    j = int(np.argmax(np.abs(theta)))
    g[j] = 1.0 if theta[j] >= 0 else -1.0
    return g


def fit_covariate_pessimistic(
    data: Dataset,
    lam: float,
    *,
    max_iter: int = 20000,
    tol: float = 1e-10,
    patience: int = 200,
) -> FitResult:
    """Minimize the worst-case design-perturbation loss at budget lam.

    The inner maximum has the closed form mean_i (|r_i| + lam*d*|theta|_inf)^2,
    a convex but nonsmooth objective.  The solver is subgradient descent with
    Polyak-style diminishing steps and iterate averaging, then deterministic
    line-search polishing along the coordinate and tie directions.
    """
    if not (lam > 0):
        raise ConfigError(f"lam must be positive, got {lam}")
    X, y = data.X, data.y
    n, d = data.n, data.d
    c = d * lam

    def objective(theta: np.ndarray) -> float:
        r = y - X @ theta
        return float(np.mean((np.abs(r) + c * np.abs(theta).max()) ** 2))

    def subgrad(theta: np.ndarray) -> np.ndarray:
        r = y - X @ theta
        w = np.abs(r) + c * np.abs(theta).max()
        return -(2.0 / n) * (X.T @ (w * np.sign(r))) + (2.0 * c / n) * w.sum() * _inf_norm_subgrad(theta)

    def refine(theta, f_theta):
        theta, f_theta = _piecewise_quadratic_polish(X, y, c, theta, f_theta, objective)
        # the penalty can drive the exact optimum to the origin; test it outright
        f_zero = objective(np.zeros(d))
        if f_zero <= f_theta:
            return np.zeros(d), f_zero
        return theta, f_theta

    theta_ls = solve_normal_equations(X, y)
    # warm start on the putative optimum so the subgradient phase only verifies;
    # shrunk starts expose different residual-sign patterns to the polish
    best_theta, best_f = None, math.inf
    for shrink in (1.0, 0.5, 0.1):
        cand, f_cand = refine(shrink * theta_ls, objective(shrink * theta_ls))
        if f_cand < best_f:
            best_theta, best_f = cand, f_cand
    theta = best_theta.copy()
    avg = theta.copy()
    gamma0 = max(1e-3 * (1.0 + best_f), 1e-12)
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        g = subgrad(theta)
        gn2 = float(g @ g)
        if gn2 == 0.0:
            break
        f_cur = objective(theta)
        target = best_f - gamma0 / math.sqrt(it)
        step = max(f_cur - target, 0.0) / gn2
        theta = theta - step * g
        avg += (theta - avg) / (it + 1)
        f_new = objective(theta)
        if not np.isfinite(f_new):
            raise SolverError("covariate-pessimistic objective diverged")
        if f_new < best_f - tol:
            best_theta, best_f = theta.copy(), f_new
            stall = 0
        else:
            if f_new < best_f:
                best_theta, best_f = theta.copy(), f_new
            stall += 1
        if it % 100 == 0:
            acc_theta, acc_f = _piecewise_quadratic_polish(X, y, c, best_theta, best_f, objective)
            if acc_f < best_f - tol:
                best_theta, best_f, theta = acc_theta, acc_f, acc_theta.copy()
                stall = 0
        if stall >= patience:
            break
    f_avg = objective(avg)
    if f_avg < best_f:
        best_theta, best_f = avg.copy(), f_avg
    best_theta, best_f = refine(best_theta, best_f)
    value = covariate_pessimistic_loss(best_theta, data, math.inf, 1.0, 1.0, lam).value
    converged = stall >= patience or it < max_iter
    return FitResult(best_theta, value, it, converged, solver="polyak_subgradient")


def _sign_patterns(size: int) -> list[tuple[float, ...]]:
    out = []
    for bits in range(1 << size):
        out.append(tuple(1.0 if bits & (1 << k) else -1.0 for k in range(size)))
    return out


def _piece_candidates(X, y, c, s, d):
    """Exact minimizers of every smooth quadratic piece at frozen residual signs.

    The objective mean((|r_i| + c*|theta|_inf)^2) is quadratic once the
    residual signs s, the set A of coordinates attaining |theta|_inf, and
    their signs are fixed.  Coordinates in A are substituted by one peak
    variable, leaving a plain least-squares problem.  All (A, signs)
    combinations are enumerated, which is cheap for small d.
    """
    sy = s * y
    sX = s[:, None] * X
    coords = list(range(d))
    for r_size in range(1, d + 1):
        for A in _combinations(coords, r_size):
            free = [j for j in coords if j not in A]
            for sig in _sign_patterns(len(A)):
                # peak column: s_i * sum_{j in A} x_ij sig_j - c
                col = sX[:, A] @ np.asarray(sig) - c
                design = np.column_stack([sX[:, free], col]) if free else col[:, None]
                try:
                    sol, *_ = np.linalg.lstsq(design, sy, rcond=None)
                except np.linalg.LinAlgError:
                    continue
                theta = np.zeros(d)
                theta[free] = sol[:-1]
                theta[list(A)] = sol[-1] * np.asarray(sig)
                yield theta


def _combinations(items, r):
    import itertools

    return itertools.combinations(items, r)


def _pinned_candidates(X, y, c, s, theta, d):
    """Piece minimizers with the smallest residuals pinned to zero.

    The absolute-residual factor can place the optimum exactly on r_i = 0
    corners; an unconstrained piece solve then oscillates across the sign
    boundary.  Pinning r_i = 0 for small subsets of the near-zero residuals
    (equality-constrained least squares via KKT) lands on the corner itself.
    """
    import itertools

    if not np.any(theta):
        return
    r = y - X @ theta
    order = np.argsort(np.abs(r))[: min(3, len(r))]
    A_peak = [int(np.argmax(np.abs(theta)))]
    sig = (1.0 if theta[A_peak[0]] >= 0 else -1.0,)
    free = [j for j in range(d) if j not in A_peak]
    sy = s * y
    sX = s[:, None] * X
    col = sX[:, A_peak] @ np.asarray(sig) - c
    design = np.column_stack([sX[:, free], col]) if free else col[:, None]
    nvar = design.shape[1]
    for k in (1, 2):
        for Z in itertools.combinations(order.tolist(), k):
            # r_i = 0 means x_i theta = y_i, linear in the piece variables
            E = np.zeros((k, nvar))
            f = np.zeros(k)
            for row, i in enumerate(Z):
                E[row, : len(free)] = X[i, free]
                E[row, -1] = float(X[i, A_peak] @ np.asarray(sig))
                f[row] = y[i]
            kkt = np.block(
                [[design.T @ design, E.T], [E, np.zeros((k, k))]]
            )
            rhs = np.concatenate([design.T @ sy, f])
            try:
                z = np.linalg.solve(kkt, rhs)[:nvar]
            except np.linalg.LinAlgError:
                continue
            cand = np.zeros(d)
            cand[free] = z[: len(free)]
            cand[A_peak] = z[-1] * np.asarray(sig)
            yield cand


def _piecewise_quadratic_polish(X, y, c, theta, f_theta, objective, rounds: int = 8):
    """Active-set polish: enumerate quadratic pieces at the current residual
    signs (plus residual-pinned corner solves), keep the best improving exact
    minimizer, and refresh the signs.  Only improving moves are accepted."""
    d = X.shape[1]
    best_theta, best_f = np.array(theta, dtype=float), f_theta
    for _ in range(rounds):
        r = y - X @ best_theta
        s = np.where(r >= 0, 1.0, -1.0)
        improved = False
        for cand in _piece_candidates(X, y, c, s, d):
            f_cand = objective(cand)
            if f_cand < best_f - 1e-15 * (1.0 + abs(best_f)):
                best_theta, best_f = cand, f_cand
                improved = True
        for cand in _pinned_candidates(X, y, c, s, best_theta, d):
            f_cand = objective(cand)
            if f_cand < best_f - 1e-15 * (1.0 + abs(best_f)):
                best_theta, best_f = cand, f_cand
                improved = True
        if not improved:
            break
    return best_theta, best_f


def fit_bridge(data: Dataset, lam: float) -> FitResult:
    """The lambda-indexed estimator family.

    lambda > 0 fits the outcome-optimistic loss with tau = 25*lambda,
    lambda = 0 is exactly least squares, and lambda < 0 fits the
    covariate-pessimistic loss with perturbation budget |lambda|.
    """
    if lam > 0:
        return fit_outcome_optimistic(data, BRIDGE_TAU_PER_LAMBDA * abs(lam))
    if lam < 0:
        return fit_covariate_pessimistic(data, abs(lam))
    return fit_ols(data)


def deming_objective(theta, data: Dataset, tau: float) -> float:
    """Closed-form covariate-optimistic loss for (2,2,2): LS/(1 + tau*d*|theta|^2)."""
    theta = np.asarray(theta, dtype=float)
    return ols_loss(theta, data) / (1.0 + tau * data.d * float(theta @ theta))


def deming_gradient(theta, data: Dataset, tau: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    X, y = data.X, data.y
    r = y - X @ theta
    L = float(np.mean(r**2))
    D = 1.0 + tau * data.d * float(theta @ theta)
    grad_L = (-2.0 / data.n) * (X.T @ r)
    grad_D = 2.0 * tau * data.d * theta
    return (grad_L - (L / D) * grad_D) / D


def fit_deming_tls(data: Dataset, tau: float, *, gtol: float = 1e-10, max_iter: int = 10000) -> FitResult:
    """Errors-in-variables fit: minimize LS/(1 + tau*d*|theta|^2).

    Damped quasi-second-order iteration from the least-squares start; the
    Hessian model keeps the exact curvature of numerator and denominator and
    drops the rank-one cross terms, which vanish at stationary points.
    """
    if not (tau > 0):
        raise ConfigError(f"tau must be positive, got {tau}")
    X = data.X
    n, d = data.n, data.d
    XtX2 = (2.0 / n) * (X.T @ X)

    def f(theta):
        return deming_objective(theta, data, tau)

    def grad(theta):
        return deming_gradient(theta, data, tau)

    def hess(theta):
        D = 1.0 + tau * d * float(theta @ theta)
        return (XtX2 - f(theta) * 2.0 * tau * d * np.eye(d)) / D

    theta0 = solve_normal_equations(X, data.y)
    theta, _, it, converged = damped_newton(f, grad, hess, theta0, gtol=gtol, max_iter=max_iter)
    if not converged:
        raise SolverError(f"errors-in-variables fit did not converge in {max_iter} iterations")
    value = covariate_optimistic_loss(theta, data, 2.0, 2.0, 2.0, tau).value
    return FitResult(theta, value, it, converged, solver="damped_newton")


# -- density power divergence ------------------------------------------------


def _gaussian_power_integral(beta_exp: float, sigma: float) -> float:
    """integral of N(y; mu, sigma^2)^(1+beta) over y; exists iff beta > -1."""
    return (2.0 * math.pi * sigma**2) ** (-beta_exp / 2.0) / math.sqrt(1.0 + beta_exp)


def dpd_objective(theta, data: Dataset, spec: DpdSpec) -> float:
    """Mean per-observation divergence objective for the conditional Gaussian model.

    For beta != 0: integral term (theta-free given sigma) minus
    (1 + 1/beta) * p_theta(y_i | x_i)^beta.  beta = 0 is the mean negative
    log-likelihood.
    """
    theta = np.asarray(theta, dtype=float)
    b, sigma = spec.beta_exp, spec.sigma_y
    r = data.y - data.X @ theta
    if b == 0:
        return float(0.5 * math.log(2.0 * math.pi * sigma**2) + np.mean(r**2) / (2.0 * sigma**2))
    if b <= -1:
        raise ConfigError(f"the Gaussian power integral diverges for beta_exp <= -1, got {b}")
    pb = (2.0 * math.pi * sigma**2) ** (-b / 2.0) * np.exp(-b * r**2 / (2.0 * sigma**2))
    return float(_gaussian_power_integral(b, sigma) - (1.0 + 1.0 / b) * np.mean(pb))


def dpd_gradient(theta, data: Dataset, spec: DpdSpec) -> np.ndarray:
    """Analytic gradient; the integral term is theta-free so only the
    power-weighted score survives."""
    theta = np.asarray(theta, dtype=float)
    b, sigma = spec.beta_exp, spec.sigma_y
    r = data.y - data.X @ theta
    if b == 0:
        return -(data.X.T @ r) / (data.n * sigma**2)
    pb = (2.0 * math.pi * sigma**2) ** (-b / 2.0) * np.exp(-b * r**2 / (2.0 * sigma**2))
    return -((1.0 + b) / (data.n * sigma**2)) * (data.X.T @ (pb * r))


def dpd_estimating_equation(theta, data: Dataset, spec: DpdSpec) -> np.ndarray:
    """(1/n) sum_i p_i^beta * r_i * x_i, the power-weighted normal equations."""
    theta = np.asarray(theta, dtype=float)
    b, sigma = spec.beta_exp, spec.sigma_y
    r = data.y - data.X @ theta
    pb = (2.0 * math.pi * sigma**2) ** (-b / 2.0) * np.exp(-b * r**2 / (2.0 * sigma**2))
    return (data.X.T @ (pb * r)) / data.n


def fit_dpd(data: Dataset, spec: DpdSpec, *, gtol: float = 1e-9, max_iter: int = 50000) -> FitResult:
    """Minimize the divergence objective by gradient descent with backtracking.

    beta_exp = 0 reduces to maximum likelihood and is solved directly by the
    normal equations.
    """
    b = spec.beta_exp
    if b <= -1:
        raise ConfigError(f"beta_exp must exceed -1 for an integrable model, got {b}")
    if b == 0:
        theta = solve_normal_equations(data.X, data.y)
        return FitResult(theta, dpd_objective(theta, data, spec), 0, True, solver="mle_normal_equations")
    theta0 = solve_normal_equations(data.X, data.y)
    theta, _, it, converged = backtracking_gradient_descent(
        lambda t: dpd_objective(t, data, spec),
        lambda t: dpd_gradient(t, data, spec),
        theta0,
        gtol=gtol,
        max_iter=max_iter,
    )
    return FitResult(theta, dpd_objective(theta, data, spec), it, converged, solver="gradient_descent")
