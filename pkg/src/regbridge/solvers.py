"""Small deterministic optimization routines used across the package.

Nothing here is problem specific: these are the raw iterations (accept-only
gradient stepping, scan-plus-golden line searches, damped Newton, IRLS)
that the loss fallbacks, the oracles, and the estimators assemble into
their solvers.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import SingularDesignError

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def solve_normal_equations(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via the normal equations.

    Raises SingularDesignError if X is rank deficient; there is deliberately
    no pseudo-inverse fallback.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesignError("design matrix is rank deficient")
    try:
        return np.linalg.solve(X.T @ X, X.T @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError("normal equations are singular") from exc


def golden_section(
    phi: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13
) -> tuple[float, float]:
    """Minimize a 1-d function on [lo, hi] by golden-section search."""
    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = phi(c), phi(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = phi(d)
    t = c if fc <= fd else d
    return t, min(fc, fd)


def scan_golden_line(
    phi: Callable[[float], float],
    lo: float,
    hi: float,
    coarse: int = 17,
    tol: float = 1e-13,
) -> tuple[float, float]:
    """Minimize a 1-d function: coarse scan, then golden section around the best cell.

    The scan makes the search robust to non-unimodal sections; golden
    section then resolves the winning cell to high precision.
    """
    ts = np.linspace(lo, hi, coarse)
    vals = np.array([phi(t) for t in ts])
    k = int(np.argmin(vals))
    a = ts[max(k - 1, 0)]
    b = ts[min(k + 1, coarse - 1)]
    t, ft = golden_section(phi, a, b, tol=tol)
    if vals[k] < ft:
        return float(ts[k]), float(vals[k])
    return float(t), float(ft)


def accept_step_opt(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    step0: float,
    *,
    maximize: bool = False,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    max_iter: int = 500,
    patience: int = 20,
    tol: float = 1e-10,
) -> tuple[np.ndarray, float, int]:
    """(Sub)gradient stepping that only accepts improving moves.

    The step length is a trust-region-style scalar: grown on success, halved
    on rejection.  Rejected moves cost one evaluation but never lose ground,
    which makes the scheme safe on nonsmooth objectives.  Stops once the
    best value improves by less than ``tol`` over ``patience`` iterations.
    """
    sign = 1.0 if maximize else -1.0
    x = np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    fx = f(x)
    step = float(step0)
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(x)
        gn = float(np.linalg.norm(g.reshape(-1)))
        if gn == 0.0 or not np.isfinite(gn):
            break
        cand = x + (sign * step / gn) * g
        if project is not None:
            cand = project(cand)
        fc = f(cand)
        gain = (fc - fx) if maximize else (fx - fc)
        if gain > 0.0:
            x, fx = cand, fc
            step *= 1.3
            stall = 0 if gain > tol else stall + 1
        else:
            step *= 0.5
            stall += 1
        if stall >= patience or step < 1e-16 * (1.0 + float(np.abs(x).max())):
            break
    return x, fx, it


def line_polish(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    directions: Sequence[np.ndarray],
    span: float,
    *,
    maximize: bool = False,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    sweeps: int = 40,
    tol: float = 1e-14,
) -> tuple[np.ndarray, float]:
    """Cyclic line searches along a fixed direction set, shrinking the span.

    Each line is minimized (or maximized) by scan-plus-golden search on the
    projected segment; only improving moves are kept.
    """
    sgn = -1.0 if maximize else 1.0
    x = np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    fx = f(x)
    cur_span = float(span)
    for _ in range(sweeps):
        f_before = fx
        for v in directions:
            base = x

            def phi(t, _v=v, _b=base):
                cand = _b + t * _v
                if project is not None:
                    cand = project(cand)
                return sgn * f(cand)

            t, ft = scan_golden_line(phi, -cur_span, cur_span, tol=1e-14 * max(1.0, cur_span))
            ft = sgn * ft
            if (ft < fx) if not maximize else (ft > fx):
                cand = base + t * v
                if project is not None:
                    cand = project(cand)
                x, fx = cand, ft
        if abs(fx - f_before) < tol * (1.0 + abs(fx)):
            cur_span *= 0.25
            if cur_span < 1e-13 * (1.0 + float(np.abs(x).max())):
                break
        else:
            cur_span = min(cur_span * 1.5, float(span))
    return x, fx


def backtracking_gradient_descent(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    gtol: float = 1e-10,
    max_iter: int = 50000,
    step0: float = 1.0,
) -> tuple[np.ndarray, float, int, bool]:
    """Gradient descent with Armijo backtracking and step re-growth."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    step = float(step0)
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(x)
        gn = float(np.linalg.norm(g))
        if gn <= gtol:
            return x, fx, it, True
        accepted = False
        for _ in range(60):
            cand = x - step * g
            fc = f(cand)
            if fc <= fx - 1e-4 * step * gn * gn:
                x, fx = cand, fc
                step *= 1.5
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # step underflow: gradient is noise-level at this point
            return x, fx, it, gn <= 10 * gtol
    return x, fx, max_iter, False


def damped_newton(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    gtol: float = 1e-10,
    max_iter: int = 10000,
) -> tuple[np.ndarray, float, int, bool]:
    """Newton iteration with Levenberg damping and Armijo backtracking."""
    x = np.array(x0, dtype=float)
    fx = f(x)
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(x)
        gn = float(np.linalg.norm(g))
        if gn <= gtol:
            return x, fx, it, True
        H = hess(x)
        lam = 0.0
        d = x.size
        for _ in range(40):
            try:
                p = np.linalg.solve(H + lam * np.eye(d), -g)
            except np.linalg.LinAlgError:
                p = -g
            if p @ g < 0:
                break
            lam = max(10.0 * lam, 1e-10 * (1.0 + float(np.trace(H)) / d))
        else:
            p = -g
        step = 1.0
        accepted = False
        for _ in range(60):
            cand = x + step * p
            fc = f(cand)
            if fc <= fx + 1e-4 * step * (g @ p):
                x, fx = cand, fc
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return x, fx, it, gn <= 10 * gtol
    return x, fx, max_iter, False


def irls_weighted_ls(
    X: np.ndarray,
    y: np.ndarray,
    weight_fn: Callable[[np.ndarray], np.ndarray],
    theta0: np.ndarray,
    *,
    tol: float = 1e-12,
    max_iter: int = 10000,
) -> tuple[np.ndarray, int, bool]:
    """Iteratively reweighted least squares driven by a residual weight map."""
    theta = np.array(theta0, dtype=float)
    for it in range(1, max_iter + 1):
        r = y - X @ theta
        w = weight_fn(r)
        Xw = X * w[:, None]
        try:
            theta_new = np.linalg.solve(Xw.T @ X, Xw.T @ y)
        except np.linalg.LinAlgError as exc:
            raise SingularDesignError("weighted normal equations are singular") from exc
        delta = float(np.linalg.norm(theta_new - theta))
        theta = theta_new
        if delta <= tol:
            return theta, it, True
    return theta, max_iter, False
