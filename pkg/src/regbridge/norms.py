"""Vector and matrix power norms, plain and dimension-standardized.

The standardized q-norm replaces the power sum by its mean, so a constant
vector (c, ..., c) has standardized norm |c| regardless of length.  The
matrix variant takes the standardized beta-norm of every row and aggregates
the row values with a standardized alpha-norm.  Exponents may be ``math.inf``,
in which case every formula degenerates to the max of absolute values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

# Above this exponent, direct power sums of small magnitudes underflow;
# accumulation is then done on values scaled by the max entry.
_DIRECT_POWER_LIMIT = 16.0


@dataclass(frozen=True)
class NormSpec:
    """Perturbation geometry: norm exponents plus the budget scale tau.

    alpha aggregates across observations, beta across coordinates within one
    observation, gamma is the exponent applied to the norm inside penalties
    and constraints, and tau is the perturbation budget (tau = 0 degenerates
    every loss to plain least squares).
    """

    alpha: float
    beta: float
    gamma: float
    tau: float

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ConfigError(f"alpha must be in (0, inf], got {self.alpha}")
        if not (self.beta > 0):
            raise ConfigError(f"beta must be in (0, inf], got {self.beta}")
        if not (0 < self.gamma < math.inf):
            raise ConfigError(f"gamma must be a positive finite real, got {self.gamma}")
        if not (self.tau >= 0):
            raise ConfigError(f"tau must be non-negative, got {self.tau}")


def _check_exponent(q: float) -> None:
    if not (q > 0):  # also rejects NaN
        raise ConfigError(f"norm exponent must be positive or inf, got {q}")


def _abs_array(z, name: str) -> np.ndarray:
    a = np.asarray(z, dtype=float)
    if a.size == 0:
        raise DimensionError(f"{name} must be nonempty")
    return np.abs(a)


def _power_mean(a: np.ndarray, q: float, mean: bool) -> float:
    """(sum |a_i|^q)^(1/q), or the mean-based variant.  a is nonnegative."""
    m = float(a.max())
    if q == math.inf or m == 0.0:
        return m
    denom = a.size if mean else 1
    if q > _DIRECT_POWER_LIMIT:
        # scale by the max so every ratio is <= 1 before exponentiation
        s = float(((a / m) ** q).sum())
        return m * (s / denom) ** (1.0 / q)
    s = float((a**q).sum())
    return (s / denom) ** (1.0 / q)


def vector_norm(z, q: float) -> float:
    """q-norm of a vector: (sum_i |z_i|^q)^(1/q); q = inf gives max |z_i|."""
    _check_exponent(q)
    return _power_mean(_abs_array(z, "vector"), q, mean=False)


def std_vector_norm(z, q: float) -> float:
    """Standardized q-norm: ((1/m) sum_i |z_i|^q)^(1/q); q = inf gives max |z_i|."""
    _check_exponent(q)
    return _power_mean(_abs_array(z, "vector"), q, mean=True)


def std_matrix_norm(mat, alpha: float, beta: float) -> float:
    """Standardized (alpha, beta)-norm of a matrix.

    Computes the standardized alpha-norm of the vector of standardized
    beta-norms of the rows.  For alpha == beta this equals
    (sum_ij |d_ij|^alpha / (n*d))^(1/alpha).
    """
    _check_exponent(alpha)
    _check_exponent(beta)
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"matrix must have n, d >= 1, got shape {a.shape}")
    rows = np.abs(a)
    row_norms = np.array([_power_mean(rows[i], beta, mean=True) for i in range(rows.shape[0])])
    return _power_mean(row_norms, alpha, mean=True)
