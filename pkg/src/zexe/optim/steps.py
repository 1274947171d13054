"""Step-size and smoothing-radius schedules."""

import math
from dataclasses import dataclass, field

ARMIJO_C = 1e-4


def adaptive_stepsize(f_val, g_norm_sq, gamma_lo, gamma_hi):
    """``max(gamma_lo, min(f_val / ||g||^2, gamma_hi))``."""
    if g_norm_sq <= 0:
        raise RuntimeError("adaptive step needs a nonzero surrogate; take the exploration branch")
    return max(gamma_lo, min(f_val / g_norm_sq, gamma_hi))


def smoothing_update(h_k, g_norm_sq, omega, h0, h_min):
    """Halve the radius (floored at ``h_min``) after descent, reset to ``h0`` otherwise."""
    if g_norm_sq >= omega:
        return max(h_k / 2, h_min)
    return h0


def inverse_sqrt_stepsize(k, scale=1.0):
    """``scale / sqrt(k)`` with iterations counted from 1."""
    return scale / math.sqrt(k + 1)


def langevin_beta(k):
    """Noise temperature ``0.5 * log(k + 2) / (k + 2)``."""
    return 0.5 * math.log(k + 2) / (k + 2)


@dataclass
class LineSearchResult:
    step: float
    trials: int
    points: list = field(default_factory=list)
    values: list = field(default_factory=list)
    accepted: bool = False
    budget_exhausted: bool = False


def armijo_linesearch(objective, v, g, f_v, budget_remaining, shrink=0.5, max_trials=10,
                      initial=1.0, c=ARMIJO_C):
    """Backtracking search for ``F(v - t g) <= F(v) - c t ||g||^2``.

    Tries ``initial, initial*shrink, ...`` for at most ``max_trials`` steps;
    every trial costs one evaluation and the search stops early when
    ``budget_remaining`` runs out, returning the best step tried so far.
    If nothing is accepted the step ``initial * shrink**max_trials`` is returned.
    """
    g_norm_sq = float(g @ g)
    if g_norm_sq <= 0:
        raise ValueError("line search needs a nonzero direction")
    if max_trials < 1:
        raise ValueError("max_trials must be at least 1")
    res = LineSearchResult(step=initial * shrink**max_trials, trials=0)
    t = initial
    best_val, best_t = math.inf, None
    for _ in range(max_trials):
        if res.trials >= budget_remaining:
            res.budget_exhausted = True
            if best_t is not None:
                res.step = best_t
            return res
        x = v - t * g
        fx = float(objective(x))
        res.trials += 1
        res.points.append(x)
        res.values.append(fx)
        if fx <= f_v - c * t * g_norm_sq:
            res.step = t
            res.accepted = True
            return res
        if fx < best_val:
            best_val, best_t = fx, t
        t *= shrink
    return res

