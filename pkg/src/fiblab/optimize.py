"""Multi-start projected descent for nonsmooth margin landscapes.

Smallest-singular-value margins behave like |g(x)| near their zero sets:
kinked, with a gradient that a fixed-step central difference misreads as
soon as the stencil straddles the kink. The descent therefore ties the
finite-difference step to the current function value (staying on one side
of the kink) and restarts the line search from a large trial step every
iteration, which converges geometrically both on kink minima and on flat
quartic valleys where fixed-step gradient methods stall.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Projector = Callable[[np.ndarray], np.ndarray]
Feasible = Callable[[np.ndarray], bool]

_BIG = 1e30


@dataclass(frozen=True)
class DescentResult:
    x: np.ndarray
    value: float
    iterations: int
    evaluations: int


def _guarded(fun: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    def safe(x: np.ndarray) -> float:
        try:
            v = float(fun(x))
        except Exception:
            return _BIG
        return v if np.isfinite(v) else _BIG

    return safe


def numeric_gradient(fun: Callable[[np.ndarray], float], x: np.ndarray,
                     h: float) -> np.ndarray:
    g = np.zeros_like(x)
    for j in range(x.shape[0]):
        step = np.zeros_like(x)
        step[j] = h
        g[j] = (fun(x + step) - fun(x - step)) / (2.0 * h)
    return g


def descend(
    fun: Callable[[np.ndarray], float],
    x0: np.ndarray,
    project: Projector,
    feasible: Feasible | None = None,
    max_iter: int = 200,
    trial_step: float = 0.25,
    min_step: float = 1e-14,
    target: float = 1e-14,
    fd_step: float = 1e-6,
) -> DescentResult:
    """Projected descent with a fresh halving line search per iteration."""
    safe = _guarded(fun)
    x = project(np.asarray(x0, dtype=float))
    fx = safe(x)
    evals = 1
    it = 0
    g_scale = 0.0  # running gradient-magnitude estimate
    for it in range(1, max_iter + 1):
        if fx <= target or fx >= _BIG:
            break
        point_scale = 1.0 + float(np.linalg.norm(x))
        h_max = fd_step * point_scale
        h_min = 1e-12 * point_scale
        h = h_max if g_scale == 0.0 else min(h_max, max(h_min, 0.3 * fx / g_scale))
        improved = False
        for _ in range(4):  # retry with a finer stencil when the search stalls
            g = numeric_gradient(safe, x, h)
            evals += 2 * x.shape[0]
            gnorm = float(np.linalg.norm(g))
            if not np.isfinite(gnorm) or gnorm == 0.0:
                h = max(h * 0.1, h_min)
                continue
            d = -g / gnorm
            step = trial_step
            while step >= min_step:
                cand = project(x + step * d)
                if feasible is None or feasible(cand):
                    fc = safe(cand)
                    evals += 1
                    if fc < fx:
                        x, fx = cand, fc
                        g_scale = gnorm
                        improved = True
                        break
                step *= 0.5
            if improved or h <= h_min * 1.0001:
                break
            h = max(h * 0.1, h_min)
        if not improved:
            break
    return DescentResult(x=x, value=fx, iterations=it, evaluations=evals)


def multi_start(
    fun: Callable[[np.ndarray], float],
    starts: Sequence[np.ndarray],
    project_for: Callable[[np.ndarray], Projector],
    feasible: Feasible | None = None,
    max_iter: int = 200,
    trial_step: float = 0.25,
    target: float = 1e-14,
) -> tuple[DescentResult, list[DescentResult]]:
    """Run descend from every start; the projector may depend on the start
    (e.g. each start stays on its own sphere). Stops early once a start
    reaches the target. Returns (best, all)."""
    results: list[DescentResult] = []
    for s in starts:
        res = descend(
            fun, s, project_for(s), feasible=feasible,
            max_iter=max_iter, trial_step=trial_step, target=target,
        )
        results.append(res)
        if res.value <= target:
            break
    best = min(results, key=lambda r: r.value)
    return best, results


def sphere_projector(radius: float) -> Projector:
    def project(x: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(x))
        if norm == 0.0:
            out = np.zeros_like(x)
            out[0] = radius
            return out
        return (radius / norm) * x

    return project


def ball_projector(radius: float) -> Projector:
    def project(x: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(x))
        if norm <= radius:
            return x
        return (radius / norm) * x

    return project
