"""
Optimize
--------

Damped Newton-Raphson maximization of concave log-likelihoods.
"""

from dataclasses import dataclass
import logging
import typing as t

import numpy as np
from scipy import linalg


logger = logging.getLogger(__name__)

Vector = np.ndarray
Objective = t.Callable[[Vector], float]
Gradient = t.Callable[[Vector], Vector]
Hessian = t.Callable[[Vector], np.ndarray]


@dataclass
class NewtonResult:
    params: np.ndarray
    loglike: float
    gradient: np.ndarray
    hessian: np.ndarray
    iterations: int
    converged: bool
    boundary: bool = False
    message: str = ""


def _ascent_direction(gradient: Vector, hessian: np.ndarray) -> Vector:
    """Solve ``-H d = g`` with a ridge on ``-H`` when it is not positive definite."""
    neg = -hessian
    ridge = 0.0
    scale = max(1.0, float(np.max(np.abs(np.diag(neg))))) if neg.size else 1.0
    for _ in range(20):
        try:
            factor = linalg.cho_factor(neg + ridge * np.eye(len(neg)), check_finite=False)
            return linalg.cho_solve(factor, gradient, check_finite=False)
        except (linalg.LinAlgError, ValueError):
            ridge = scale * 1e-8 if ridge == 0.0 else ridge * 10
    return gradient / scale


def newton(
    loglike: Objective,
    score: Gradient,
    hessian: Hessian,
    start: t.Sequence[float],
    *,
    lower: t.Optional[t.Sequence[float]] = None,
    maxiter: int = 100,
    gtol: float = 1e-8,
    ftol: float = 1e-10,
    gtol_loose: float = 1e-6,
    max_halvings: int = 30,
) -> NewtonResult:
    """
    Maximize `loglike` from `start` with step-halving Newton iterations.

    Parameters with a finite `lower` bound are held at the bound while the gradient pushes them
    below it. Convergence requires the projected gradient's largest entry to fall below `gtol`,
    or the relative log-likelihood change to fall below `ftol` while the gradient is below
    `gtol_loose`. A loosely converged point gets one more full Newton step.

    Args:
        loglike: Objective.
        score: Gradient of the objective.
        hessian: Hessian of the objective.
        start: Starting values.

    Keyword Arguments:
        lower: Lower bounds, ``-inf`` for unbounded parameters.
        maxiter: Iteration limit.
    """
    x = np.array(start, dtype=float)
    bounds = np.full(len(x), -np.inf) if lower is None else np.asarray(lower, dtype=float)
    x = np.maximum(x, bounds)
    ll = loglike(x)
    if not np.isfinite(ll):
        raise ValueError("log-likelihood is not finite at the starting values")

    def free_set(x: Vector, g: Vector) -> np.ndarray:
        return ~((x <= bounds) & (g < 0))

    g = score(x)
    H = hessian(x)
    for iteration in range(1, maxiter + 1):
        free = free_set(x, g)
        step = np.zeros_like(x)
        if free.any():
            step[free] = _ascent_direction(g[free], H[np.ix_(free, free)])

        size = 1.0
        for _ in range(max_halvings):
            candidate = np.maximum(x + size * step, bounds)
            ll_new = loglike(candidate)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                break
            size /= 2
        else:
            g = score(x)
            return NewtonResult(
                x, ll, g, H, iteration, False, bool((x <= bounds).any()), "step halving failed"
            )

        change = abs(ll_new - ll) / max(1.0, abs(ll))
        x, ll = candidate, ll_new
        g = score(x)
        H = hessian(x)
        projected = np.where(free_set(x, g), g, 0.0)
        gmax = float(np.max(np.abs(projected))) if projected.size else 0.0
        logger.debug("newton iteration %d: loglike=%.10g max|g|=%.3g", iteration, ll, gmax)
        if gmax < gtol or (change < ftol and gmax < gtol_loose):
            if gmax >= gtol:
                x, ll, g, H = _polish(loglike, score, hessian, x, ll, g, H, free_set(x, g), bounds)
            at_bound = bool((x <= bounds).any())
            return NewtonResult(x, ll, g, H, iteration, True, at_bound, "converged")

    return NewtonResult(
        x, ll, g, H, maxiter, False, bool((x <= bounds).any()), "iteration limit reached"
    )


def _polish(loglike, score, hessian, x, ll, g, H, free, bounds):
    """Take one full Newton step from a loosely converged point when it does not lower `loglike`."""
    step = np.zeros_like(x)
    if free.any():
        step[free] = _ascent_direction(g[free], H[np.ix_(free, free)])
    candidate = np.maximum(x + step, bounds)
    ll_new = loglike(candidate)
    if not (np.isfinite(ll_new) and ll_new >= ll):
        return x, ll, g, H
    return candidate, ll_new, score(candidate), hessian(candidate)


def numeric_hessian(score: Gradient, x: t.Sequence[float], *, eps: float = 1e-5) -> np.ndarray:
    """
    Return the symmetrized central-difference Jacobian of `score` at `x`.

    >>> numeric_hessian(lambda v: -2 * v, [1.0, 2.0]).round(6).tolist()
    [[-2.0, 0.0], [0.0, -2.0]]
    """
    x = np.asarray(x, dtype=float)
    k = len(x)
    H = np.empty((k, k))
    for j in range(k):
        h = eps * max(1.0, abs(x[j]))
        up, down = x.copy(), x.copy()
        up[j] += h
        down[j] -= h
        H[:, j] = (score(up) - score(down)) / (2 * h)
    return (H + H.T) / 2
