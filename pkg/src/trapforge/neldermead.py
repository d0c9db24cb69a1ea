"""Deterministic Nelder-Mead simplex minimizer with box projection.

Standard coefficients: reflection 1, expansion 2, contraction 1/2,
shrink 1/2. Every trial point is projected onto the box before it is
evaluated, so the objective never sees an infeasible point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteObjectiveError, ValidationError

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class NMResult:
    x_best: np.ndarray
    f_best: float
    trace: list[float] = field(default_factory=list)  # best-so-far per iteration
    nfev: int = 0
    nit: int = 0
    converged: bool = False
    message: str = ""


def nelder_mead(objective, x0, *, scale=5e-6, tol: float = 1e-4, max_evals: int = 5000,
                bounds=None, f_floor: float = 1e-300) -> NMResult:
    """Minimize ``objective`` from ``x0``.

    Parameters
    ----------
    objective : callable
        Maps a 1-D float array to a float.
    x0 : array_like
        Start point; the initial simplex adds ``scale`` along each axis
        (stepping backwards where that would leave the box).
    scale : float or array_like
        Initial simplex edge length(s).
    tol : float
        Stop once ``f_worst - f_best <= tol * max(|f_best|, f_floor)``.
    max_evals : int
        Hard cap on objective evaluations.
    bounds : (lower, upper), optional
        Scalars or arrays; trial points are clipped into the box.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    n = x0.size
    if n < 1:
        raise ValidationError("nelder_mead needs at least one variable")
    if max_evals < n + 1:
        raise ValidationError(f"max_evals must be >= n + 1 = {n + 1}")
    if not tol > 0:
        raise ValidationError("tol must be > 0")
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (n,))
    if bounds is None:
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
    else:
        lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), (n,)).copy()
        if np.any(lo > hi):
            raise ValidationError("lower bound exceeds upper bound")

    def project(x):
        return np.minimum(np.maximum(x, lo), hi)

    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        val = float(objective(x))
        if not np.isfinite(val):
            raise NonFiniteObjectiveError(f"objective returned {val} at x = {x.tolist()}", x.copy())
        return val

    simplex = np.empty((n + 1, n))
    simplex[0] = project(x0)
    for i in range(n):
        v = simplex[0].copy()
        v[i] += scale[i]
        if v[i] > hi[i]:
            v[i] = simplex[0][i] - scale[i]
        simplex[i + 1] = project(v)
    fvals = np.array([f(v) for v in simplex])

    trace: list[float] = []
    nit = 0
    converged = False
    message = "maximum evaluations reached"
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        trace.append(float(fvals[0]))
        if fvals[-1] - fvals[0] <= tol * max(abs(fvals[0]), f_floor):
            converged = True
            message = "simplex spread below tolerance"
            break
        if nfev >= max_evals:
            break
        nit += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = project(centroid + REFLECT * (centroid - worst))
        fr = f(xr)
        if fr < fvals[0]:
            if nfev >= max_evals:
                simplex[-1], fvals[-1] = xr, fr
                continue
            xe = project(centroid + EXPAND * (xr - centroid))
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if nfev >= max_evals:
            if fr < fvals[-1]:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = project(centroid + CONTRACT * (xr - centroid))
            fc = f(xc)
            accept = fc <= fr
        else:
            xc = project(centroid + CONTRACT * (worst - centroid))
            fc = f(xc)
            accept = fc < fvals[-1]
        if accept:
            simplex[-1], fvals[-1] = xc, fc
            continue
        for i in range(1, n + 1):
            if nfev >= max_evals:
                break
            simplex[i] = project(simplex[0] + SHRINK * (simplex[i] - simplex[0]))
            fvals[i] = f(simplex[i])

    order = np.argsort(fvals, kind="stable")
    return NMResult(simplex[order[0]].copy(), float(fvals[order[0]]), trace, nfev, nit,
                    converged, message)
