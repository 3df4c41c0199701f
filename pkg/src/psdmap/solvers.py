"""Optimization kernels: l1-regularized least squares and relatives.

``bpdn`` minimizes 0.5*||r - M z||^2 + lam*||z||_1 with a monotone
accelerated proximal-gradient scheme (fixed step 1/L, L an upper bound on
the squared spectral norm — the accepted iterate never increases the
objective). ``min_l1_equality`` drives the same scheme through a decreasing
penalty homotopy to approximate weighted l1 minimization under an equality
constraint. ``fit_filter`` is the pilot least-squares deconvolution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from .numcore import solve_least_squares, spectral_norm_sq

__all__ = [
    "BpdnOptions",
    "SolveReport",
    "bpdn",
    "min_l1_equality",
    "fit_filter",
]

DEFAULT_LAMBDA_SCALE = 0.01
DEFAULT_FEAS_TOL = 1e-6


class BpdnOptions(BaseModel):
    """Solver knobs for the l1-regularized least-squares problems.

    ``lam`` is the absolute penalty weight; when left unset it is chosen
    per problem as ``lam_scale * max|M^T r|``. ``tolerance`` bounds the
    relative change of both the iterate and the objective at termination.
    """

    lam: float | None = Field(default=None, gt=0.0)
    lam_scale: float = Field(default=DEFAULT_LAMBDA_SCALE, gt=0.0)
    max_iterations: int = Field(default=5000, ge=1)
    tolerance: float = Field(default=1e-6, gt=0.0)


@dataclass
class SolveReport:
    """Outcome of one solver call."""

    solution: np.ndarray
    iterations: int
    objective: float
    converged: bool
    wall_time: float
    feasibility_residual: float | None = None


def _soft_threshold(v: np.ndarray, thresholds: np.ndarray | float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thresholds, 0.0)


def _objective(mat, target, z, lam, weights) -> float:
    resid = target - mat @ z
    return 0.5 * float(resid @ resid) + lam * float(np.abs(z) @ weights)


def _monotone_fista(mat, target, lam, weights, lipschitz, x0, max_iterations, tolerance):
    """Weighted-l1 proximal gradient with Nesterov momentum and a monotone
    acceptance rule: the accepted iterate sequence never increases the
    objective. A step that would increase it restarts the momentum from the
    best point; if even the restarted plain gradient step fails, the
    Lipschitz bound was too small and the step is halved. Momentum is also
    restarted when it points uphill (gradient restart rule), which recovers
    linear convergence on strongly convex instances.

    The products ``mat @ x`` and ``mat @ y`` are tracked incrementally: the
    momentum update is affine, so each iteration costs two matrix-vector
    products (one refresh every 1000 iterations bounds drift).
    Returns (solution, iterations, objective, converged)."""
    step = 1.0 / lipschitz if lipschitz > 0 else 1.0
    x = x0.copy()
    y = x0.copy()
    mx = mat @ x
    my = mx.copy()
    t = 1.0
    restarted = True  # first step is a plain gradient step from x0
    obj = 0.5 * float((target - mx) @ (target - mx)) + lam * float(np.abs(x) @ weights)
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        grad = mat.T @ (my - target)
        candidate = _soft_threshold(y - step * grad, step * lam * weights)
        mcand = mat @ candidate
        resid = target - mcand
        cand_obj = 0.5 * float(resid @ resid) + lam * float(np.abs(candidate) @ weights)
        if cand_obj > obj:
            if restarted:
                # descent failed from the best point: step too long
                step *= 0.5
            y = x
            my = mx.copy()
            t = 1.0
            restarted = True
            continue
        restarted = False
        step_change = float(np.linalg.norm(candidate - x))
        obj_change = obj - cand_obj
        if float(grad @ (candidate - x)) > 0.0:
            y = candidate
            my = mcand.copy()
            t = 1.0
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            momentum = (t - 1.0) / t_next
            y = candidate + momentum * (candidate - x)
            my = mcand + momentum * (mcand - mx)
            t = t_next
        x, obj, mx = candidate, cand_obj, mcand
        if iterations % 1000 == 0:
            my = mat @ y
        if (
            step_change <= tolerance * (1.0 + np.linalg.norm(x))
            and obj_change <= tolerance * (1.0 + abs(obj))
        ):
            converged = True
            break
    return x, iterations, obj, converged


def _validate_system(mat, target):
    m = np.asarray(mat, dtype=float)
    r = np.asarray(target, dtype=float)
    if m.ndim != 2 or r.ndim != 1 or m.shape[0] != r.size:
        raise ValueError(f"inconsistent system: matrix {m.shape}, target length {r.size}")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(r))):
        raise ValueError("solver inputs must be finite")
    return m, r


def bpdn(mat, target, opts: BpdnOptions | None = None) -> SolveReport:
    """Sparse recovery by 0.5*||r - M z||^2 + lam*||z||_1.

    The penalty defaults to ``opts.lam_scale * max|M^T r|`` so it tracks the
    measurement scale. Non-convergence is reported through the
    ``converged`` flag, never raised.
    """
    opts = opts or BpdnOptions()
    m, r = _validate_system(mat, target)
    start = time.perf_counter()
    correlation = float(np.max(np.abs(m.T @ r))) if r.size else 0.0
    lam = opts.lam if opts.lam is not None else opts.lam_scale * correlation
    if lam == 0.0 and correlation == 0.0:
        # zero data: the minimizer is exactly zero
        z = np.zeros(m.shape[1])
        return SolveReport(z, 0, 0.0, True, time.perf_counter() - start)
    weights = np.ones(m.shape[1])
    lipschitz = spectral_norm_sq(m)
    z, iters, obj, ok = _monotone_fista(
        m, r, lam, weights, lipschitz, np.zeros(m.shape[1]), opts.max_iterations, opts.tolerance
    )
    return SolveReport(z, iters, obj, ok, time.perf_counter() - start)


def min_l1_equality(
    mat,
    target,
    weights,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iterations: int = 5000,
    lipschitz: float | None = None,
) -> SolveReport:
    """Weighted l1 minimization subject to ``M z = b`` (to tolerance).

    ``weights`` must be 0/1 per coordinate; zeros mark unpenalized
    coordinates that are never thresholded. Solved by a homotopy of
    weighted penalized problems with the penalty driven down (warm-started)
    until the residual satisfies ``||M z - b|| <= feas_tol * (1 + ||b||)``,
    plus one polishing stage. The reported objective is the weighted l1
    norm of the solution.
    """
    m, b = _validate_system(mat, target)
    w = np.asarray(weights, dtype=float)
    if w.shape != (m.shape[1],) or not np.all(np.isin(w, (0.0, 1.0))):
        raise ValueError("weights must be a 0/1 vector matching the unknown dimension")
    start = time.perf_counter()
    feas_target = feas_tol * (1.0 + np.linalg.norm(b))
    lip = lipschitz if lipschitz is not None else spectral_norm_sq(m)
    lam = 0.01 * float(np.max(np.abs(m.T @ b))) if b.size else 0.0
    z = np.zeros(m.shape[1])
    total_iters = 0
    if lam == 0.0:
        resid = float(np.linalg.norm(m @ z - b))
        return SolveReport(z, 0, 0.0, resid <= feas_target, time.perf_counter() - start, resid)
    # decay phase: drive the penalty down until the residual meets tolerance
    lam0 = lam
    for _ in range(16):
        z, iters, _, _ = _monotone_fista(m, b, lam, w, lip, z, max_iterations, 0.1 * feas_tol)
        total_iters += iters
        if float(np.linalg.norm(m @ z - b)) <= feas_target:
            break
        lam *= 0.1
    # polish phase: penalized rounds at a moderate, slowly decaying penalty
    # with an equality projection between rounds. Refinement along the
    # constraint's null space changes the penalized objective by only
    # penalty * improvement, so a vanishing penalty stalls it; keeping the
    # penalty moderate keeps that term visible while the projection removes
    # the penalty's range-space bias each round.
    lam_polish = 0.1 * lam0
    obj_prev = np.inf
    for _ in range(40):
        z = _project_equality(m, b, z)
        objective = float(np.abs(z) @ w)
        if abs(obj_prev - objective) <= 1e-11 * (1.0 + objective) and lam_polish < 1e-4 * lam0:
            break
        obj_prev = objective
        z, iters, _, _ = _monotone_fista(m, b, lam_polish, w, lip, z, max_iterations, 0.01 * feas_tol)
        total_iters += iters
        lam_polish = max(0.6 * lam_polish, 1e-6 * lam0)
    z = _project_equality(m, b, z)
    resid = float(np.linalg.norm(m @ z - b))
    objective = float(np.abs(z) @ w)
    return SolveReport(
        z, total_iters, objective, resid <= feas_target, time.perf_counter() - start, resid
    )


def _project_equality(m: np.ndarray, b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Minimum-norm correction onto the affine set ``M z = b``.

    For a consistent system this removes the residual the homotopy left
    behind without moving the iterate more than proportionally to it.
    """
    residual = m @ z - b
    try:
        correction = m.T @ np.linalg.solve(m @ m.T, residual)
    except np.linalg.LinAlgError:
        correction = m.T @ (np.linalg.pinv(m @ m.T) @ residual)
    return z - correction


def fit_filter(pilot_matrix, received, ridge: float = 0.0) -> np.ndarray:
    """Least-squares tap estimate from a circulant pilot system.

    ``pilot_matrix`` is the circulant matrix of the known transmitted
    pilot; the returned taps minimize ``||received - pilot_matrix @ taps||``
    (ridge-stabilized when requested).
    """
    return solve_least_squares(pilot_matrix, received, ridge=ridge)
