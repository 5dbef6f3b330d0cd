"""Synthetic regression data: ground-truth models, sampling, and impediments.

Covariates are drawn i.i.d. uniform on [-1, 1]^d and outcomes are the true
regression function plus Gaussian noise.  Impediments corrupt a generated
dataset in a controlled way: Gaussian noise added to every covariate entry,
or a fixed shift added to a random fraction of the outcomes.

All randomness comes from counter-based Philox generators keyed by an
integer seed, so identical inputs give bit-identical outputs and distinct
trials can be generated concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

RNG_ALGORITHM = "philox4x64"

TRUE_MODEL_KINDS = ("linear", "exp", "cos", "quad_minus_one")
IMPEDIMENT_KINDS = ("none", "covariate_noise", "outcome_outliers")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class TrueModel:
    """Ground-truth regression function f*(x), selected by kind.

    linear:         <x, theta*>
    exp:            exp(<x, theta*>)
    cos:            cos(<x, theta*>)
    quad_minus_one: <x, theta*>^2 - 1
    """

    kind: str
    theta_star: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in TRUE_MODEL_KINDS:
            raise ConfigError(f"unknown true-model kind {self.kind!r}")
        object.__setattr__(self, "theta_star", tuple(float(v) for v in self.theta_star))
        if len(self.theta_star) == 0:
            raise DimensionError("theta_star must be nonempty")

    @property
    def d(self) -> int:
        return len(self.theta_star)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Evaluate f* row-wise on an (n, d) covariate matrix."""
        z = np.asarray(X, dtype=float) @ np.asarray(self.theta_star)
        if self.kind == "linear":
            return z
        if self.kind == "exp":
            return np.exp(z)
        if self.kind == "cos":
            return np.cos(z)
        return z**2 - 1.0


@dataclass(frozen=True)
class Impediment:
    """A controlled corruption applied to a generated dataset."""

    kind: str = "none"
    noise_sd: float = 0.5
    outlier_shift: float = 10.0
    outlier_frac: float = 0.05

    def __post_init__(self):
        if self.kind not in IMPEDIMENT_KINDS:
            raise ConfigError(f"unknown impediment kind {self.kind!r}")
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be non-negative, got {self.noise_sd}")
        if not (0.0 <= self.outlier_frac <= 1.0):
            raise ConfigError(f"outlier_frac must be in [0, 1], got {self.outlier_frac}")


@dataclass(frozen=True)
class Dataset:
    """An observed design matrix X (n x d) and outcome vector y (n)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.ndim != 1:
            raise DimensionError(f"X must be 2-d and y 1-d, got {X.ndim}-d and {y.ndim}-d")
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionError(f"dataset needs n, d >= 1, got shape {X.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def outlier_count(frac: float, n: int) -> int:
    """Number of outcomes to shift: round(frac * n), half rounding to even.

    The half-even rule gives 2 shifted outcomes at n=50, frac=0.05 and 1 at
    n=25.  Float fuzz is removed before rounding so e.g. frac*n = 2.4999999996
    counts as exactly half.
    """
    return int(round(round(frac * n, 9)))


def generate_dataset(model: TrueModel, n: int, d: int, sigma_y: float, seed: int) -> Dataset:
    """Draw n covariates uniform on [-1, 1]^d and noisy outcomes around f*.

    Deterministic in (model, n, d, sigma_y, seed).
    """
    if n < 1:
        raise DimensionError(f"n must be >= 1, got {n}")
    if d != model.d:
        raise DimensionError(f"d={d} does not match len(theta_star)={model.d}")
    if sigma_y < 0:
        raise ConfigError(f"sigma_y must be non-negative, got {sigma_y}")
    rng = _rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    y = model.predict(X)
    if sigma_y > 0:
        y = y + sigma_y * rng.standard_normal(n)
    return Dataset(X=X, y=y)


def apply_impediment(data: Dataset, imp: Impediment, seed: int) -> Dataset:
    """Return a corrupted copy of the dataset; kind='none' copies it unchanged."""
    if imp.kind == "none":
        return Dataset(X=data.X.copy(), y=data.y.copy())
    rng = _rng(seed)
    if imp.kind == "covariate_noise":
        X = data.X + rng.normal(0.0, imp.noise_sd, size=data.X.shape)
        return Dataset(X=X, y=data.y.copy())
    count = outlier_count(imp.outlier_frac, data.n)
    if count > data.n:
        raise ConfigError(f"outlier count {count} exceeds n={data.n}")
    y = data.y.copy()
    if count > 0:
        idx = rng.choice(data.n, size=count, replace=False)
        y[idx] += imp.outlier_shift
    return Dataset(X=data.X.copy(), y=y)


def dump_dataset_csv(data: Dataset, path) -> None:
    """Write the dataset as CSV with header x1,...,xd,y and round-trip floats."""
    header = ",".join([f"x{j + 1}" for j in range(data.d)] + ["y"])
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            for i in range(data.n):
                cells = [f"{v:.17g}" for v in data.X[i]] + [f"{data.y[i]:.17g}"]
                fh.write(",".join(cells) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset CSV to {path}: {exc}") from exc
