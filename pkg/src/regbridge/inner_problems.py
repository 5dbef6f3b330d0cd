"""Shared description of the inner perturbation problems.

Every perturbation loss hides an inner optimization: optimistic losses
minimize a penalized objective over the perturbation, pessimistic losses
maximize the fit term over a norm ball.  This module gives both the loss
evaluators and the brute-force oracles one common vocabulary: the objective,
its gradient (linear predictor only), feasibility, and ball projections.

Perturbations are an outcome slack vector of shape (n,) for the y-problems
or a design perturbation matrix of shape (n, d) for the x-problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .synth import Dataset

Y_KINDS = ("y_min", "y_max")
X_KINDS = ("x_min", "x_max")
MIN_KINDS = ("y_min", "x_min")
MAX_KINDS = ("y_max", "x_max")


def linear_predict(theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    return X @ theta


def _std_pow(a: np.ndarray, q: float, axis: int) -> np.ndarray:
    """Standardized q-norm along one axis of a nonnegative array."""
    if q == math.inf:
        return a.max(axis=axis)
    return (np.mean(a**q, axis=axis)) ** (1.0 / q)


@dataclass
class InnerProblem:
    """One inner minimization or maximization instance at a fixed theta.

    For min kinds the objective is fit + penalty with penalty weight 1/tau;
    for max kinds the objective is the fit term alone, constrained to the
    ball std_norm(pert)^gamma <= tau.
    """

    kind: str
    theta: np.ndarray
    data: Dataset
    alpha: float
    gamma: float
    tau: float
    beta: float | None = None
    predict: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in Y_KINDS + X_KINDS:
            raise ConfigError(f"unknown inner-problem kind {self.kind!r}")
        if self.kind in X_KINDS and self.beta is None:
            raise ConfigError("x-problems require a beta exponent")
        if self.tau < 0:
            raise ConfigError(f"tau must be non-negative, got {self.tau}")
        self.theta = np.asarray(self.theta, dtype=float)
        self._base_residuals = self.data.y - self._predict(self.data.X)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        if self.predict is None:
            return linear_predict(self.theta, X)
        return self.predict(self.theta, X)

    @property
    def is_linear(self) -> bool:
        return self.predict is None

    @property
    def is_min(self) -> bool:
        return self.kind in MIN_KINDS

    @property
    def shape(self) -> tuple[int, ...]:
        if self.kind in Y_KINDS:
            return (self.data.n,)
        return (self.data.n, self.data.d)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    @property
    def residuals(self) -> np.ndarray:
        """y - f_theta(X) at the unperturbed design."""
        return self._base_residuals

    @property
    def radius(self) -> float:
        """Constraint radius on the standardized norm itself (max kinds)."""
        return self.tau ** (1.0 / self.gamma)

    # -- objective pieces ---------------------------------------------------

    def fit_term(self, pert: np.ndarray) -> float:
        return float(self.fit_term_batch(pert[None, ...])[0])

    def fit_term_batch(self, perts: np.ndarray) -> np.ndarray:
        """Mean squared residual for a batch of perturbations.

        Batch evaluation requires the linear predictor for x-problems; a
        custom model falls back to a Python loop.
        """
        e = self._base_residuals
        if self.kind in Y_KINDS:
            return np.mean((e[None, :] + perts) ** 2, axis=1)
        if self.is_linear:
            return np.mean((e[None, :] - perts @ self.theta) ** 2, axis=1)
        out = np.empty(perts.shape[0])
        for i, delta in enumerate(perts):
            r = self.data.y - self._predict(self.data.X + delta)
            out[i] = float(np.mean(r**2))
        return out

    def pert_norm(self, pert: np.ndarray) -> float:
        return float(self.pert_norm_batch(pert[None, ...])[0])

    def pert_norm_batch(self, perts: np.ndarray) -> np.ndarray:
        a = np.abs(perts)
        if self.kind in Y_KINDS:
            return _std_pow(a, self.alpha, axis=1)
        row = _std_pow(a, self.beta, axis=2)
        return _std_pow(row, self.alpha, axis=1)

    def penalty(self, pert: np.ndarray) -> float:
        return float(self.penalty_batch(pert[None, ...])[0])

    def penalty_batch(self, perts: np.ndarray) -> np.ndarray:
        if self.tau == 0:
            raise ConfigError("penalty form is undefined at tau = 0")
        return self.pert_norm_batch(perts) ** self.gamma / self.tau

    def objective(self, pert: np.ndarray) -> float:
        return float(self.objective_batch(pert[None, ...])[0])

    def objective_batch(self, perts: np.ndarray) -> np.ndarray:
        """Penalized objective for min kinds, bare fit term for max kinds."""
        if self.is_min:
            return self.fit_term_batch(perts) + self.penalty_batch(perts)
        return self.fit_term_batch(perts)

    # -- feasibility and projections (max kinds) ----------------------------

    def feasible(self, pert: np.ndarray, rel_slack: float = 1e-9) -> bool:
        return self.pert_norm(pert) <= self.radius * (1.0 + rel_slack)

    def project_ball(self, pert: np.ndarray) -> np.ndarray:
        """Project into the constraint ball (no-op if inside).

        Exact metric projections are used where they are simple: the q = 1
        ball (sorted soft threshold), q = 2 (radial rescale, which is exact),
        and q = inf (clipping).  Other exponents fall back to radial
        rescaling, which is always feasible.  For x-problems with alpha = inf
        the ball is a product of per-row balls and rows project independently.
        """
        if self.kind in X_KINDS:
            if self.alpha == math.inf:
                row = _std_pow(np.abs(pert), self.beta, axis=1)
                over = row > self.radius * (1.0 + 1e-15)
                if not np.any(over):
                    return pert
                out = pert.copy()
                for i in np.nonzero(over)[0]:
                    out[i] = _project_vector_ball(pert[i], self.beta, self.radius)
                return out
            if self.alpha == self.beta:
                # the (alpha, alpha) matrix norm is the flat standardized norm
                flat = _project_vector_ball(pert.reshape(-1), self.alpha, self.radius)
                return flat.reshape(pert.shape)
            nrm = self.pert_norm(pert)
            if nrm <= self.radius or nrm == 0.0:
                return pert
            return pert * (self.radius / nrm)
        return _project_vector_ball(pert, self.alpha, self.radius)

    def boundary_scaled(self, pert: np.ndarray) -> np.ndarray | None:
        """Radially rescale a nonzero perturbation onto the constraint boundary."""
        nrm = self.pert_norm(pert)
        if nrm == 0.0:
            return None
        return pert * (self.radius / nrm)

    def rows_boundary_scaled(self, pert: np.ndarray) -> np.ndarray | None:
        """Scale each row to the row budget; valid for x-problems with alpha=inf,
        where the matrix constraint is a per-row constraint."""
        if self.kind not in X_KINDS or self.alpha != math.inf:
            return None
        a = np.abs(pert)
        row = _std_pow(a, self.beta, axis=1)
        if np.any(row == 0.0):
            return None
        return pert * (self.radius / row)[:, None]

    # -- gradients (linear predictor; subgradient conventions at kinks) -----

    def fit_grad(self, pert: np.ndarray) -> np.ndarray:
        e = self._base_residuals
        n = self.data.n
        if self.kind in Y_KINDS:
            return (2.0 / n) * (e + pert)
        if not self.is_linear:
            return _numeric_grad(self.fit_term, pert)
        r = e - pert @ self.theta
        return (-2.0 / n) * np.outer(r, self.theta)

    def penalty_grad(self, pert: np.ndarray) -> np.ndarray:
        """Subgradient of penalty; zero at the origin and at flat kinks."""
        if self.kind in Y_KINDS:
            s = self.pert_norm(pert)
            if s == 0.0:
                return np.zeros_like(pert)
            ds = _std_norm_grad_vec(pert, self.alpha, s)
            return (self.gamma / self.tau) * s ** (self.gamma - 1.0) * ds
        row = _std_pow(np.abs(pert), self.beta, axis=1)
        s = _std_pow(row, self.alpha, axis=0)
        if s == 0.0:
            return np.zeros_like(pert)
        # dS/drow_i, then drow_i/dpert_ij
        d_outer = _std_norm_grad_vec(row, self.alpha, float(s))
        grad = np.zeros_like(pert)
        for i in range(pert.shape[0]):
            if row[i] == 0.0 or d_outer[i] == 0.0:
                continue
            d_inner = _std_norm_grad_vec(pert[i], self.beta, float(row[i]))
            grad[i] = d_outer[i] * d_inner
        return (self.gamma / self.tau) * float(s) ** (self.gamma - 1.0) * grad

    def objective_grad(self, pert: np.ndarray) -> np.ndarray:
        if self.is_min:
            return self.fit_grad(pert) + self.penalty_grad(pert)
        return self.fit_grad(pert)


def _project_vector_ball(v: np.ndarray, q: float, std_radius: float) -> np.ndarray:
    """Project a vector onto the standardized-q-norm ball of given radius."""
    m = v.size
    if q == math.inf:
        return np.clip(v, -std_radius, std_radius)
    nrm = _std_pow(np.abs(v), q, axis=0)
    if nrm <= std_radius or nrm == 0.0:
        return v
    if q == 1:
        return _project_l1(v, std_radius * m)
    # radial rescale; exact for q = 2, feasible fallback otherwise
    return v * (std_radius / nrm)


def _project_l1(v: np.ndarray, R: float) -> np.ndarray:
    """Euclidean projection onto the plain l1 ball of radius R."""
    a = np.abs(v)
    if a.sum() <= R:
        return v
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, u.size + 1)
    k = int(ks[u - (css - R) / ks > 0][-1])
    level = (css[k - 1] - R) / k
    return np.sign(v) * np.maximum(a - level, 0.0)


def _std_norm_grad_vec(z: np.ndarray, q: float, value: float) -> np.ndarray:
    """Gradient of the standardized q-norm of a vector with known value > 0.

    For q = inf returns the subgradient that puts all mass on the first
    maximizing entry (deterministic tie break).
    """
    m = z.size
    if q == math.inf:
        g = np.zeros(m)
        j = int(np.argmax(np.abs(z)))
        g[j] = np.sign(z[j]) if z[j] != 0 else 0.0
        return g
    az = np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = value ** (1.0 - q) * az ** (q - 1.0) * np.sign(z) / m
    return np.where(az == 0.0, 0.0, g)


def _numeric_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        step = h * max(1.0, abs(flat[i]))
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * step)
    return g
