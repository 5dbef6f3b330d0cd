"""Brute-force solvers for the inner perturbation problems.

Two independent modes back-check every closed form in the loss module:

* grid mode exhaustively scans a bounded lattice over the perturbation
  entries (with deterministic zoom passes around the incumbent), and for
  constrained maximizations additionally evaluates each lattice direction
  rescaled onto the constraint boundary, where the maximum of a convex fit
  term must lie;
* gradient mode runs projected (sub)gradient ascent/descent from several
  deterministic random restarts, followed by line-search polishing.

Both return the best value found and never consult the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError
from .inner_problems import InnerProblem
from .solvers import accept_step_opt, line_polish

_CHUNK = 1 << 17


def _row_std_norms(perts: np.ndarray, beta: float) -> np.ndarray:
    """Standardized beta-norm of each row for a (batch, n, d) array."""
    a = np.abs(perts)
    if beta == math.inf:
        return a.max(axis=2)
    return (np.mean(a**beta, axis=2)) ** (1.0 / beta)


@dataclass(frozen=True)
class GridSpec:
    """Lattice resolution: points per axis, optional fixed box half-width,
    zoom passes around the incumbent, and a hard evaluation budget."""

    points_per_axis: int = 41
    box: float | None = None
    refine: int = 3
    max_points: int = 1 << 22


@dataclass(frozen=True)
class GradientSpec:
    """Projected ascent/descent configuration (restarts are deterministic)."""

    restarts: int = 8
    step_frac: float = 0.1
    max_iter: int = 500
    patience: int = 20
    tol: float = 1e-10
    seed: int = 0
    polish: bool = True


def inner_oracle(problem: InnerProblem, resolution):
    """Solve an inner problem by brute force; resolution picks the mode."""
    from .losses import InnerSolution  # local import to avoid a module cycle

    if problem.tau == 0:
        zero = np.zeros(problem.shape)
        return InnerSolution(value=problem.fit_term(zero), argument=zero, exact=True)
    if isinstance(resolution, GridSpec):
        value, arg = _grid_solve(problem, resolution)
    elif isinstance(resolution, GradientSpec):
        value, arg = _gradient_solve(problem, resolution)
    else:
        raise TypeError(f"resolution must be GridSpec or GradientSpec, got {type(resolution)!r}")
    return InnerSolution(value=float(value), argument=arg, exact=False)


# -- grid mode ---------------------------------------------------------------


def _auto_box(problem: InnerProblem) -> float:
    e_max = float(np.abs(problem.residuals).max())
    return max(2.0 * problem.radius, 2.0 * e_max, 1e-8)


def _lattice_chunks(points: int, dim: int, center: np.ndarray, half: float):
    """Yield lattice coordinates (chunk, dim) for a points^dim grid."""
    axis = np.linspace(-half, half, points)
    total = points**dim
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        coords = np.empty((idx.size, dim))
        rem = idx
        for k in range(dim - 1, -1, -1):
            coords[:, k] = axis[rem % points]
            rem = rem // points
        yield coords + center[None, :]


def _grid_pass(problem: InnerProblem, points: int, center: np.ndarray, half: float):
    """Scan one lattice; returns (value, argument, raw_point) of the best candidate."""
    best_val = math.inf if problem.is_min else -math.inf
    best_arg = None
    best_raw = None
    radius = problem.radius
    for coords in _lattice_chunks(points, problem.dim, center, half):
        perts = coords.reshape(-1, *problem.shape)
        if problem.is_min:
            vals = problem.objective_batch(perts)
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val = float(vals[k])
                best_arg = perts[k].copy()
                best_raw = perts[k].copy()
            continue
        # max kinds: feasible raw points ...
        row_norms = None
        if len(problem.shape) == 2:
            row_norms = _row_std_norms(perts, problem.beta)
            if problem.alpha == math.inf:
                norms = row_norms.max(axis=1)
            else:
                norms = np.mean(row_norms**problem.alpha, axis=1) ** (1.0 / problem.alpha)
        else:
            norms = problem.pert_norm_batch(perts)
        feas = norms <= radius * (1.0 + 1e-12)
        if np.any(feas):
            vals = problem.fit_term_batch(perts[feas])
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val = float(vals[k])
                best_arg = perts[feas][k].copy()
                best_raw = best_arg.copy()
        # ... plus every lattice direction pushed onto the boundary
        nz = norms > 0
        if np.any(nz):
            scaled = perts[nz] * (radius / norms[nz]).reshape(-1, *([1] * len(problem.shape)))
            vals = problem.fit_term_batch(scaled)
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val = float(vals[k])
                best_arg = scaled[k].copy()
                best_raw = perts[nz][k].copy()
        # ... and, when rows are independently constrained, every row on its budget
        if row_norms is not None and problem.alpha == math.inf:
            ok = np.all(row_norms > 0, axis=1)
            if np.any(ok):
                factors = radius / row_norms[ok]
                scaled = perts[ok] * factors[:, :, None]
                vals = problem.fit_term_batch(scaled)
                k = int(np.argmax(vals))
                if vals[k] > best_val:
                    best_val = float(vals[k])
                    best_arg = scaled[k].copy()
                    best_raw = perts[ok][k].copy()
    return best_val, best_arg, best_raw


def _grid_solve(problem: InnerProblem, spec: GridSpec):
    points = spec.points_per_axis
    dim = problem.dim
    if points**dim > spec.max_points:
        raise BudgetError(
            f"grid of {points}^{dim} points exceeds the budget of {spec.max_points}; "
            "reduce points_per_axis or use the gradient oracle"
        )
    half = spec.box if spec.box is not None else _auto_box(problem)
    center = np.zeros(dim)
    best_val, best_arg, best_raw = _grid_pass(problem, points, center, half)
    zero = np.zeros(problem.shape)
    v0 = problem.objective(zero) if problem.is_min else problem.fit_term(zero)
    if (problem.is_min and v0 < best_val) or (not problem.is_min and v0 > best_val):
        best_val, best_arg, best_raw = v0, zero, zero
    spacing = 2.0 * half / (points - 1)
    for _ in range(spec.refine):
        half = 1.5 * spacing
        center = best_raw.reshape(-1).copy()
        val, arg, raw = _grid_pass(problem, points, center, half)
        if (problem.is_min and val < best_val) or (not problem.is_min and val > best_val):
            best_val, best_arg, best_raw = val, arg, raw
        spacing = 2.0 * half / (points - 1)
    return best_val, best_arg


# -- gradient mode -----------------------------------------------------------


def _start_points(problem: InnerProblem, spec: GradientSpec) -> list[np.ndarray]:
    rng = np.random.Generator(np.random.Philox(spec.seed))
    scale = max(problem.radius, float(np.abs(problem.residuals).max()), 1e-6)
    starts = [np.zeros(problem.shape)]
    for _ in range(max(spec.restarts - 1, 0)):
        p = rng.standard_normal(problem.shape) * scale
        if not problem.is_min:
            p = problem.project_ball(p)
        starts.append(p)
    return starts


def _polish_directions(problem: InnerProblem, at: np.ndarray) -> list[np.ndarray]:
    dirs = []
    flat = np.eye(problem.dim)
    for k in range(problem.dim):
        dirs.append(flat[k].reshape(problem.shape))
    g = problem.objective_grad(at)
    gn = float(np.linalg.norm(g.reshape(-1)))
    if gn > 0:
        dirs.append(g / gn)
    return dirs


def _gradient_solve(problem: InnerProblem, spec: GradientSpec):
    maximize = not problem.is_min
    project = problem.project_ball if maximize else None
    f = problem.objective if problem.is_min else problem.fit_term
    step0 = spec.step_frac * max(problem.radius, float(np.abs(problem.residuals).max()), 1e-6)
    best_val = -math.inf if maximize else math.inf
    best_arg = np.zeros(problem.shape)
    for start in _start_points(problem, spec):
        x, fx, _ = accept_step_opt(
            f,
            problem.objective_grad,
            start,
            step0,
            maximize=maximize,
            project=project,
            max_iter=spec.max_iter,
            patience=spec.patience,
            tol=spec.tol,
        )
        if spec.polish:
            span = max(step0, 1e-3 * (1.0 + float(np.abs(x).max())))
            x, fx = line_polish(
                f,
                x,
                _polish_directions(problem, x),
                span,
                maximize=maximize,
                project=project,
            )
        if (maximize and fx > best_val) or (not maximize and fx < best_val):
            best_val, best_arg = fx, x
    return best_val, best_arg
