"""The six regression loss functionals.

Plain least squares plus four perturbation losses: the optimistic pair
absorbs a penalized perturbation of the outcomes (y_min) or of the design
matrix (x_min) before measuring the fit, and the pessimistic pair measures
the fit under the worst perturbation inside a standardized-norm ball
(y_max, x_max).  At tau = 0 all four reduce exactly to the least-squares
loss.

Where an exact inner solution exists it is used and flagged exact=True:

* y_min, (alpha, gamma) = (1, 1): per-coordinate soft thresholding at
  1/(2*tau); equivalently twice the mean Huber loss of the residuals.
* y_min, (alpha, gamma) = (2, 2): uniform shrinkage, LS-loss / (1 + tau).
* x_min, linear model, (alpha, beta, gamma) = (2, 2, 2): rank-one row
  perturbations along theta, LS-loss / (1 + tau * d * |theta|_2^2).
* y_max, alpha = 2: slack aligned with the residual vector; alpha = inf:
  coordinate-wise sign alignment.
* x_max, linear model, alpha = inf, beta >= 1: duality row-wise, giving
  mean_i (|e_i| + s * d * std|theta|_{beta*})^2 with s the constraint
  radius and 1/beta + 1/beta* = 1.

Everything else goes through a numeric inner solver and is flagged
exact=False.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionError
from .inner_problems import InnerProblem, linear_predict
from .norms import NormSpec, std_vector_norm
from .synth import Dataset

LOSS_KINDS = ("ols", "x_min", "y_min", "x_max", "y_max")

PredictFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LossSpec:
    """Tagged choice of loss family with its perturbation geometry."""

    kind: str
    norm: NormSpec

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}")


@dataclass
class InnerSolution:
    """Value of a perturbation loss with the optimizing perturbation.

    ``exact`` records whether a closed form produced the solution; numeric
    fallbacks always set it to False.
    """

    value: float
    argument: np.ndarray | None
    exact: bool


def _residuals(theta, data: Dataset, model: PredictFn | None) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if model is None and theta.shape[0] != data.d:
        raise DimensionError(f"theta has dim {theta.shape[0]}, design has d={data.d}")
    predict = linear_predict if model is None else model
    return data.y - predict(theta, data.X)


def ols_loss(theta, data: Dataset, model: PredictFn | None = None) -> float:
    """Mean squared residual (the standardized 2-norm of residuals, squared)."""
    e = _residuals(theta, data, model)
    return float(np.mean(e**2))


def huber_rho(u: np.ndarray, eta: float) -> np.ndarray:
    """Huber function: u^2/2 below the threshold, eta*|u| - eta^2/2 above."""
    au = np.abs(u)
    return np.where(au <= eta, 0.5 * u**2, eta * au - 0.5 * eta**2)


def huber_objective(theta, data: Dataset, eta: float) -> float:
    """Mean Huber loss of the residuals at threshold eta (linear model)."""
    e = _residuals(theta, data, None)
    return float(np.mean(huber_rho(e, eta)))


def _check_tau(tau: float) -> None:
    if tau < 0:
        raise ConfigError(f"tau must be non-negative, got {tau}")


def _numeric_fallback(problem: InnerProblem) -> InnerSolution:
    from .oracles import GradientSpec, GridSpec, inner_oracle

    nonconvex = problem.gamma < 1 or problem.alpha < 1 or (
        problem.beta is not None and problem.beta < 1
    )
    if problem.is_min and nonconvex:
        # no convex structure to exploit: exhaustive lattice only
        return inner_oracle(problem, GridSpec())
    return inner_oracle(problem, GradientSpec())


def outcome_optimistic_loss(
    theta, data: Dataset, alpha: float, gamma: float, tau: float,
    model: PredictFn | None = None,
) -> InnerSolution:
    """min over slack mu of mean((e + mu)^2) + std|mu|_alpha^gamma / tau."""
    _check_tau(tau)
    e = _residuals(theta, data, model)
    n = data.n
    if tau == 0:
        return InnerSolution(float(np.mean(e**2)), np.zeros(n), exact=True)
    if alpha == 1 and gamma == 1:
        thresh = 1.0 / (2.0 * tau)
        mu = -np.sign(e) * np.maximum(np.abs(e) - thresh, 0.0)
        value = float(np.mean((e + mu) ** 2) + np.mean(np.abs(mu)) / tau)
        return InnerSolution(value, mu, exact=True)
    if alpha == 2 and gamma == 2:
        mu = -e * (tau / (1.0 + tau))
        value = float(np.mean(e**2)) / (1.0 + tau)
        return InnerSolution(value, mu, exact=True)
    problem = InnerProblem(
        kind="y_min", theta=np.asarray(theta, float), data=data,
        alpha=alpha, gamma=gamma, tau=tau, predict=model,
    )
    return _numeric_fallback(problem)


def covariate_optimistic_loss(
    theta, data: Dataset, alpha: float, beta: float, gamma: float, tau: float,
    model: PredictFn | None = None,
) -> InnerSolution:
    """min over design perturbation D of mean((y - f(X+D))^2) + std|D|_{a,b}^g / tau."""
    _check_tau(tau)
    theta = np.asarray(theta, dtype=float)
    e = _residuals(theta, data, model)
    n, d = data.n, data.d
    if tau == 0:
        return InnerSolution(float(np.mean(e**2)), np.zeros((n, d)), exact=True)
    if model is None and not np.any(theta):
        # predictions are immune to design perturbations at theta = 0
        return InnerSolution(float(np.mean(e**2)), np.zeros((n, d)), exact=True)
    if model is None and alpha == 2 and beta == 2 and gamma == 2:
        sq = float(theta @ theta)
        delta = np.outer(e / (sq + 1.0 / (tau * d)), theta)
        value = float(np.mean(e**2)) / (1.0 + tau * d * sq)
        return InnerSolution(value, delta, exact=True)
    problem = InnerProblem(
        kind="x_min", theta=theta, data=data,
        alpha=alpha, gamma=gamma, tau=tau, beta=beta, predict=model,
    )
    return _numeric_fallback(problem)


def outcome_pessimistic_loss(
    theta, data: Dataset, alpha: float, gamma: float, tau: float,
    model: PredictFn | None = None,
) -> InnerSolution:
    """max of mean((e + mu)^2) over the ball std|mu|_alpha^gamma <= tau."""
    _check_tau(tau)
    e = _residuals(theta, data, model)
    n = data.n
    if tau == 0:
        return InnerSolution(float(np.mean(e**2)), np.zeros(n), exact=True)
    rho = tau ** (1.0 / gamma)
    if alpha == 2:
        s = std_vector_norm(e, 2)
        if s == 0.0:
            # every boundary direction attains the same value; fix the first axis
            mu = np.zeros(n)
            mu[0] = rho * math.sqrt(n)
            return InnerSolution(rho**2, mu, exact=True)
        mu = (rho / s) * e
        return InnerSolution((s + rho) ** 2, mu, exact=True)
    if alpha == math.inf:
        signs = np.where(e >= 0, 1.0, -1.0)
        mu = rho * signs
        value = float(np.mean((np.abs(e) + rho) ** 2))
        return InnerSolution(value, mu, exact=True)
    problem = InnerProblem(
        kind="y_max", theta=np.asarray(theta, float), data=data,
        alpha=alpha, gamma=gamma, tau=tau, predict=model,
    )
    return _numeric_fallback(problem)


def _conjugate_exponent(beta: float) -> float:
    if beta == 1:
        return math.inf
    if beta == math.inf:
        return 1.0
    return beta / (beta - 1.0)


def _dual_direction(theta: np.ndarray, beta: float) -> np.ndarray:
    """Row direction w with std|w|_beta = 1 maximizing <w, theta>.

    Ties in the beta = 1 case resolve to the lowest maximizing index.
    """
    d = theta.size
    if beta == 1:
        j = int(np.argmax(np.abs(theta)))
        u = np.zeros(d)
        u[j] = d * (1.0 if theta[j] >= 0 else -1.0)
        return u
    if beta == math.inf:
        return np.where(theta >= 0, 1.0, -1.0)
    bstar = _conjugate_exponent(beta)
    u = np.sign(theta) * np.abs(theta) ** (bstar - 1.0)
    return u / std_vector_norm(u, beta)


def covariate_pessimistic_loss(
    theta, data: Dataset, alpha: float, beta: float, gamma: float, tau: float,
    model: PredictFn | None = None,
) -> InnerSolution:
    """max of mean((y - f(X+D))^2) over the ball std|D|_{alpha,beta}^gamma <= tau."""
    _check_tau(tau)
    theta = np.asarray(theta, dtype=float)
    e = _residuals(theta, data, model)
    n, d = data.n, data.d
    if tau == 0:
        return InnerSolution(float(np.mean(e**2)), np.zeros((n, d)), exact=True)
    if model is None and alpha == math.inf and beta >= 1:
        if not np.any(theta):
            return InnerSolution(float(np.mean(e**2)), np.zeros((n, d)), exact=True)
        s = tau ** (1.0 / gamma)
        bstar = _conjugate_exponent(beta)
        pen = s * d * std_vector_norm(theta, bstar)
        value = float(np.mean((np.abs(e) + pen) ** 2))
        w = s * _dual_direction(theta, beta)
        signs = np.where(e >= 0, 1.0, -1.0)
        delta = -signs[:, None] * w[None, :]
        return InnerSolution(value, delta, exact=True)
    problem = InnerProblem(
        kind="x_max", theta=theta, data=data,
        alpha=alpha, gamma=gamma, tau=tau, beta=beta, predict=model,
    )
    return _numeric_fallback(problem)


def evaluate_loss(spec: LossSpec, theta, data: Dataset, model: PredictFn | None = None) -> InnerSolution:
    """Dispatch a LossSpec to the matching loss functional."""
    ns = spec.norm
    if spec.kind == "ols":
        return InnerSolution(ols_loss(theta, data, model), None, exact=True)
    if spec.kind == "y_min":
        return outcome_optimistic_loss(theta, data, ns.alpha, ns.gamma, ns.tau, model)
    if spec.kind == "y_max":
        return outcome_pessimistic_loss(theta, data, ns.alpha, ns.gamma, ns.tau, model)
    if spec.kind == "x_min":
        return covariate_optimistic_loss(theta, data, ns.alpha, ns.beta, ns.gamma, ns.tau, model)
    return covariate_pessimistic_loss(theta, data, ns.alpha, ns.beta, ns.gamma, ns.tau, model)


def calibrate_huber_threshold(
    tau: float, n_instances: int = 20, seed: int = 0
) -> tuple[float, float, np.ndarray]:
    """Estimate the soft threshold of the (1, 1) outcome-optimistic loss numerically.

    Solves small inner problems with the gradient oracle and reads the
    threshold off the optimal slack: every thresholded coordinate satisfies
    |e_i + mu_i| = threshold.  Returns (mean, coefficient of variation,
    raw estimates).  The closed form is never consulted.
    """
    from .oracles import GradientSpec, inner_oracle

    if tau <= 0:
        raise ConfigError("threshold calibration needs tau > 0")
    rng = np.random.Generator(np.random.Philox(seed))
    estimates = []
    for _ in range(n_instances):
        n = int(rng.integers(2, 5))
        # residuals well above any plausible threshold so the slack is active
        e = (1.0 / tau) * (1.0 + rng.uniform(0.5, 3.0, size=n))
        e *= rng.choice([-1.0, 1.0], size=n)
        data = Dataset(X=np.zeros((n, 1)), y=e)
        problem = InnerProblem(
            kind="y_min", theta=np.zeros(1), data=data, alpha=1.0, gamma=1.0, tau=tau
        )
        sol = inner_oracle(problem, GradientSpec(restarts=4, max_iter=2000))
        mu = sol.argument
        active = np.abs(mu) > 1e-6 * np.abs(e)
        estimates.extend(np.abs(e[active] + mu[active]).tolist())
    est = np.asarray(estimates)
    mean = float(est.mean())
    cv = float(est.std() / mean) if mean != 0 else math.inf
    return mean, cv, est
