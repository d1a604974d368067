"""Limited-memory BFGS minimizer with a strong Wolfe line search.

Implements the classic two-loop recursion over a bounded history of
curvature pairs. The objective callback returns (value, gradient);
convergence is declared on the sup-norm of the gradient.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, OptimizationError

__all__ = ["OptimizerConfig", "OptimizeResult", "minimize"]


@dataclass(frozen=True)
class OptimizerConfig:
    memory: int = 10
    grad_tol: float = 1e-8
    max_iters: int = 500
    c1: float = 1e-4
    c2: float = 0.9

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError("line search requires 0 < c1 < c2 < 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be > 0")


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad_norm: float  # sup-norm of the gradient at x
    iterations: int
    converged: bool


def minimize(objective, x0, config: OptimizerConfig | None = None) -> OptimizeResult:
    """Minimize a smooth function given its (value, gradient) callback.

    Stops when the gradient sup-norm falls at or below ``grad_tol`` or
    after ``max_iters`` accepted steps, whichever comes first. The
    returned objective value never exceeds the starting value.
    """
    cfg = config or OptimizerConfig()
    x = np.array(x0, dtype=np.float64)

    def evaluate(pt):
        f, g = objective(pt)
        return float(f), np.asarray(g, dtype=np.float64)

    f, g = evaluate(x)
    if not np.isfinite(f) or not np.isfinite(g).all():
        raise NumericalError("objective or gradient non-finite at the starting point")
    gnorm = float(np.abs(g).max(initial=0.0))
    if gnorm <= cfg.grad_tol:
        return OptimizeResult(x=x, fun=f, grad_norm=gnorm, iterations=0, converged=True)

    s_hist: deque[np.ndarray] = deque(maxlen=cfg.memory)
    y_hist: deque[np.ndarray] = deque(maxlen=cfg.memory)
    rho_hist: deque[float] = deque(maxlen=cfg.memory)

    for it in range(1, cfg.max_iters + 1):
        d = -_two_loop(g, s_hist, y_hist, rho_hist)
        if d @ g >= 0.0:
            # stale curvature produced a non-descent direction; restart
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            d = -g
        alpha, f_new, g_new = _wolfe_search(evaluate, x, f, g, d, cfg.c1, cfg.c2)
        if not np.isfinite(g_new).all():
            raise NumericalError(
                f"gradient non-finite at accepted iterate (iteration {it})"
            )
        step = alpha * d
        y_vec = g_new - g
        sy = step @ y_vec
        if sy > 1e-10 * np.linalg.norm(step) * np.linalg.norm(y_vec):
            s_hist.append(step)
            y_hist.append(y_vec)
            rho_hist.append(1.0 / sy)
        x = x + step
        f, g = f_new, g_new
        gnorm = float(np.abs(g).max(initial=0.0))
        if gnorm <= cfg.grad_tol:
            return OptimizeResult(x=x, fun=f, grad_norm=gnorm, iterations=it, converged=True)
    return OptimizeResult(
        x=x, fun=f, grad_norm=gnorm, iterations=cfg.max_iters, converged=False
    )


def _two_loop(g, s_hist, y_hist, rho_hist) -> np.ndarray:
    """Apply the implicit inverse-Hessian approximation to the gradient."""
    q = g.copy()
    n = len(s_hist)
    if n == 0:
        return q
    alphas = np.empty(n)
    for i in range(n - 1, -1, -1):
        alphas[i] = rho_hist[i] * (s_hist[i] @ q)
        q -= alphas[i] * y_hist[i]
    scale = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
    q *= scale
    for i in range(n):
        b = rho_hist[i] * (y_hist[i] @ q)
        q += s_hist[i] * (alphas[i] - b)
    return q


def _wolfe_search(evaluate, x, f0, g0, d, c1, c2, max_expand=30):
    """Strong Wolfe line search (bracket then zoom).

    Non-finite trial values are treated as infinitely bad, steering the
    bracket back toward the finite region.
    """
    gd0 = float(g0 @ d)
    a_prev, f_prev, gd_prev = 0.0, f0, gd0
    a = 1.0
    for i in range(max_expand):
        f_a, g_a = evaluate(x + a * d)
        bad = not np.isfinite(f_a)
        gd_a = float(g_a @ d) if not bad else np.inf
        if bad or f_a > f0 + c1 * a * gd0 or (i > 0 and f_a >= f_prev):
            return _zoom(evaluate, x, d, f0, gd0, a_prev, f_prev, gd_prev, a, f_a, c1, c2)
        if abs(gd_a) <= -c2 * gd0:
            return a, f_a, g_a
        if gd_a >= 0.0:
            return _zoom(evaluate, x, d, f0, gd0, a, f_a, gd_a, a_prev, f_prev, c1, c2)
        a_prev, f_prev, gd_prev = a, f_a, gd_a
        a *= 2.0
    raise OptimizationError(
        f"line search failed to bracket a Wolfe step after {max_expand} expansions",
        last_iterate=x,
    )


def _zoom(evaluate, x, d, f0, gd0, a_lo, f_lo, gd_lo, a_hi, f_hi, c1, c2, max_iter=50):
    """Shrink a bracketing interval until the strong Wolfe conditions hold."""
    best = None  # last point satisfying sufficient decrease
    for _ in range(max_iter):
        span = a_hi - a_lo
        # minimizer of the quadratic through (a_lo, f_lo, gd_lo) and f_hi,
        # falling back to bisection when the model is unusable
        a = a_lo + 0.5 * span
        if np.isfinite(f_hi):
            denom = 2.0 * (f_hi - f_lo - gd_lo * span)
            if denom != 0.0:
                cand = a_lo - gd_lo * span * span / denom
                lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
                margin = 0.1 * (hi - lo)
                if lo + margin <= cand <= hi - margin:
                    a = cand
        f_a, g_a = evaluate(x + a * d)
        bad = not np.isfinite(f_a)
        gd_a = float(g_a @ d) if not bad else np.inf
        if bad or f_a > f0 + c1 * a * gd0 or f_a >= f_lo:
            a_hi, f_hi = a, f_a
        else:
            best = (a, f_a, g_a)
            if abs(gd_a) <= -c2 * gd0:
                return a, f_a, g_a
            if gd_a * (a_hi - a_lo) >= 0.0:
                a_hi, f_hi = a_lo, f_lo
            a_lo, f_lo, gd_lo = a, f_a, gd_a
        if abs(a_hi - a_lo) <= 1e-14 * max(1.0, abs(a_lo)):
            break
    if best is not None:
        return best
    if f_lo < f0 and a_lo > 0.0:
        # sufficient decrease was achieved earlier even though curvature
        # never held (flat valley); accept the decrease
        _, g_lo = evaluate(x + a_lo * d)
        return a_lo, f_lo, g_lo
    raise OptimizationError(
        "line search interval collapsed without sufficient decrease",
        last_iterate=x,
    )
