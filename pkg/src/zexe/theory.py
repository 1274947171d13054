"""Numerical checks of the smoothing and convergence results behind ZEXE.

Every check runs on a synthetic objective with a known Lipschitz constant,
minimum and (where it exists) gradient, and compares Monte-Carlo estimates
against analytic bounds with three standard errors of slack.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .optim import OptimizerConfig, StepPolicy, run_attack
from .optim.frames import sample_direction_frame
from .optim.surrogates import central_surrogate, forward_surrogate

SE_SLACK = 3.0


def _norm(z):
    return np.sqrt(np.einsum("...i,...i->...", z, z))


@dataclass(frozen=True)
class SyntheticObjective:
    """Test function with known constants; accepts points of shape ``(..., d)``.

    Kinds
    -----
    ``affine``        ``<a, x> + b``
    ``quadratic``     ``x^T A x + <b, x>`` (A symmetric)
    ``norm_cone``     ``L ||x - x*||``
    ``nonconvex_lipschitz````L/2 ||x - x*|| + L / (2 nu sqrt(d)) sum_i |sin(nu (x_i - x*_i))|``
    """

    kind: str
    params: dict = field(default_factory=dict)
    lipschitz: float | None = None
    min_value: float = -math.inf

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.kind == "affine":
            return x @ p["a"] + p["b"]
        if self.kind == "quadratic":
            return np.einsum("...i,ij,...j->...", x, p["A"], x) + x @ p["b"]
        if self.kind == "norm_cone":
            return self.lipschitz * _norm(x - p["x_star"])
        if self.kind == "nonconvex_lipschitz":
            L, nu = self.lipschitz, p["nu"]
            z = x - p["x_star"]
            d = z.shape[-1]
            return 0.5 * L * _norm(z) + L / (2 * nu * math.sqrt(d)) * np.abs(np.sin(nu * z)).sum(axis=-1)
        raise ValueError(f"unknown objective kind {self.kind!r}")

    def gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.kind == "affine":
            return np.broadcast_to(p["a"], x.shape).copy()
        if self.kind == "quadratic":
            return 2 * x @ p["A"] + p["b"]
        raise ValueError(f"{self.kind} has no closed-form gradient everywhere")

    @property
    def d(self):
        p = self.params
        for key in ("a", "b", "x_star"):
            if key in p:
                return len(p[key])
        return p["A"].shape[0]


def affine(a, b=0.0):
    a = np.asarray(a, dtype=np.float64)
    return SyntheticObjective("affine", {"a": a, "b": float(b)}, float(np.linalg.norm(a)))


def quadratic(A, b=None):
    A = np.asarray(A, dtype=np.float64)
    A = (A + A.T) / 2
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
    eig = np.linalg.eigvalsh(A)
    lo = -math.inf
    if eig.min() > 0:
        lo = float(-0.25 * b @ np.linalg.solve(A, b))
    return SyntheticObjective("quadratic", {"A": A, "b": b}, None, lo)


def norm_cone(L, x_star):
    return SyntheticObjective("norm_cone", {"x_star": np.asarray(x_star, dtype=np.float64)}, float(L), 0.0)


def nonconvex_lipschitz(L, nu, x_star):
    """Nonconvex L-Lipschitz witness; the sine term is scaled by ``1/sqrt(d)``
    so that its gradient norm never exceeds ``L/2``."""
    return SyntheticObjective("nonconvex_lipschitz", {"x_star": np.asarray(x_star, dtype=np.float64), "nu": float(nu)},
                              float(L), 0.0)


# -- Monte-Carlo oracles -------------------------------------------------------

def sample_ball(n, d, rng):
    """``n`` points uniform in the unit ball of ``R^d``."""
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * rng.random(n)[:, None] ** (1.0 / d)


def smoothed_value_oracle(objective, v, h, n_samples, rng):
    """MC estimate of ``E_u F(v + h u)`` over the unit ball, with its standard error."""
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    v = np.asarray(v, dtype=np.float64)
    vals = objective(v + h * sample_ball(n_samples, v.shape[0], rng))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples))


def smoothed_gradient_oracle(objective, v, h, n_samples, rng, step=None):
    """MC estimate of the gradient of the ball-smoothed objective.

    Central differences of the smoothed value with step ``1e-3 h`` by default,
    using the same ball samples on both sides so the MC noise cancels.
    Returns the gradient estimate and per-coordinate standard errors.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    step = 1e-3 * h if step is None else step
    pts = v + h * sample_ball(n_samples, d, rng)
    shifts = np.concatenate([np.eye(d), -np.eye(d)]) * step
    vals = objective(pts[None, :, :] + shifts[:, None, :])
    diffs = ((vals[:d] - vals[d:]) / (2 * step)).T
    return diffs.mean(axis=0), diffs.std(axis=0, ddof=1) / math.sqrt(n_samples)


# -- checks --------------------------------------------------------------------

def verify_smoothing_upper_bound(objective, points, h, n_samples, rng):
    """Check ``F_h(v) <= F(v) + L h`` up to three standard errors at each point."""
    L = objective.lipschitz
    worst, violations = -math.inf, 0
    for v in points:
        est, se = smoothed_value_oracle(objective, v, h, n_samples, rng)
        excess = est - (float(objective(v)) + L * h)
        worst = max(worst, excess / max(se, 1e-300))
        if excess > SE_SLACK * se:
            violations += 1
    return {"check": "smoothing_bound", "objective": objective.kind, "h": h,
            "points": len(points), "violations": violations,
            "max_excess_in_se": worst, "pass": violations == 0}


def verify_unbiasedness(objective, v, h, l, n_frames, rng):
    """MC mean of central surrogates against the exact gradient, coordinatewise within 3 SE.

    Only valid for affine or quadratic objectives, where the smoothed gradient
    equals the true gradient and central differences are exact along any line.
    """
    if objective.kind not in ("affine", "quadratic"):
        raise ValueError("unbiasedness check needs an affine or quadratic objective")
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    target = objective.gradient(v)
    acc = np.zeros(d)
    acc2 = np.zeros(d)
    for _ in range(n_frames):
        g = central_surrogate(objective, v, sample_direction_frame(d, l, rng), h).vector
        acc += g
        acc2 += g * g
    mean = acc / n_frames
    var = np.maximum(acc2 / n_frames - mean**2, 0.0) * n_frames / max(n_frames - 1, 1)
    se = np.sqrt(var / n_frames)
    dev = np.abs(mean - target)
    # identical-to-target coordinates (zero variance, zero deviation) pass trivially
    z = np.where(se > 0, dev / np.where(se > 0, se, 1.0), np.where(dev > 1e-9, np.inf, 0.0))
    return {"check": "unbiasedness", "objective": objective.kind, "d": d, "l": l, "h": h,
            "frames": n_frames, "mean": mean.tolist(), "target": target.tolist(),
            "se": se.tolist(), "max_deviation": float(dev.max()),
            "max_deviation_in_se": float(z.max()), "pass": bool(z.max() <= SE_SLACK)}


def verify_surrogate_bound(L, d, l, h, n_frames, rng, n_points=10, scale=10.0):
    """Count forward surrogates on ``L ||x||`` whose squared norm exceeds ``d^2 L^2 / l``.

    Each sampled frame is tried at ``n_points`` random probe points. A relative
    slack of 1e-12 absorbs floating-point rounding at the (measure-zero) equality case.
    """
    obj = norm_cone(L, np.zeros(d))
    bound = d * d * L * L / l
    points = rng.standard_normal((n_points, d)) * scale
    violations, worst = 0, 0.0
    for _ in range(n_frames):
        frame = sample_direction_frame(d, l, rng)
        for v in points:
            nsq = forward_surrogate(obj, v, frame, h).norm_sq
            worst = max(worst, nsq)
            if nsq > bound * (1 + 1e-12):
                violations += 1
    return {"check": "surrogate_bound", "L": L, "d": d, "l": l, "h": h,
            "frames": n_frames, "points": n_points, "bound": bound,
            "max_norm_sq": worst, "violations": violations, "pass": violations == 0}


def optimal_constant_step(gap, L, d, l, h, K):
    """Constant step minimizing the bound: ``sqrt(gap l h / (K L^3 d^2 sqrt d))``."""
    return math.sqrt(gap * l * h / (K * L**3 * d**2 * math.sqrt(d)))


def convergence_bound(gap, L, d, l, h, gammas):
    """``S / A`` for the window with steps ``gammas`` and initial gap ``F_h(v) - min F``."""
    gammas = np.asarray(gammas, dtype=np.float64)
    S = gap + L**3 * d**2 * math.sqrt(d) / l * float((gammas**2).sum()) / h
    return S / float(gammas.sum())


def windows(trace, omega):
    """Maximal runs ``(start, stop)`` of consecutive iterations with ``||g||^2 >= omega``."""
    out, start = [], None
    for i, rec in enumerate(trace):
        ok = rec.g_norm_sq >= omega and rec.branch == "descent"
        if ok and start is None:
            start = i
        if not ok and start is not None:
            out.append((start, i))
            start = None
    if start is not None:
        out.append((start, len(trace)))
    return out


@dataclass
class RateTrace:
    K: int
    gamma: float
    gap: float
    eta: float
    bound: float
    windows: list
    f_best: list
    gammas: list
    g_norm_sq: list
    h: list
    f_v: list


def rate_run(objective, v0, l, h, K, seed, n_grad_samples=10_000, n_eval_points=50,
             n_value_samples=10_000):
    """One ZEXE run with ``omega = 0`` and the constant step that minimizes the bound.

    ``eta`` averages the squared smoothed-gradient norm over the window,
    measured at ``n_eval_points`` evenly spaced iterates (all weights are equal
    because the step is constant).
    """
    rng = np.random.default_rng([seed, 0xE7A])
    v0 = np.asarray(v0, dtype=np.float64)
    d = v0.shape[0]
    L = objective.lipschitz
    fh0, _ = smoothed_value_oracle(objective, v0, h, n_value_samples, rng)
    gap = fh0 - objective.min_value
    gamma = optimal_constant_step(gap, L, d, l, h, K)
    cfg = OptimizerConfig(l=l, omega=0.0, budget=K * (l + 1), h0=h, h_min=h,
                          step=StepPolicy(kind="constant", gamma=gamma), bounds=(0.0, 256.0))
    res = run_attack(objective, v0, cfg, seed=seed, record_iterates=True)
    wins = windows(res.trace, 0.0)
    idx = np.unique(np.linspace(0, len(res.iterates) - 1, min(n_eval_points, len(res.iterates))).astype(int))
    sq = []
    for i in idx:
        g, _ = smoothed_gradient_oracle(objective, res.iterates[i], h, n_grad_samples, rng)
        sq.append(float(g @ g))
    gammas = [rec.gamma for rec in res.trace]
    return RateTrace(K=K, gamma=gamma, gap=gap, eta=float(np.mean(sq)),
                     bound=convergence_bound(gap, L, d, l, h, gammas), windows=wins,
                     f_best=[r.f_best for r in res.trace], gammas=gammas,
                     g_norm_sq=[r.g_norm_sq for r in res.trace], h=[r.h for r in res.trace],
                     f_v=[r.f_v for r in res.trace])


def convergence_experiment(objective, v0, l, h, K_grid=(250, 500, 1000, 2000), repetitions=20,
                           seed=0, **kw):
    """Run :func:`rate_run` over a grid of horizons and summarize eta against the bound."""
    if not math.isfinite(objective.min_value) or objective.lipschitz is None:
        raise ValueError("convergence experiment needs a Lipschitz objective with a finite minimum")
    rows = []
    for K in K_grid:
        runs = [rate_run(objective, v0, l, h, K, seed * 100_003 + r * 7919 + K, **kw) for r in range(repetitions)]
        etas = np.array([r.eta for r in runs])
        bounds = np.array([r.bound for r in runs])
        se = float(etas.std(ddof=1) / math.sqrt(len(etas))) if len(etas) > 1 else 0.0
        monotone = all(all(a >= b for a, b in zip(r.f_best, r.f_best[1:])) for r in runs)
        windows_ok = all(all(r.g_norm_sq[i] >= 0.0 for a, b in r.windows for i in range(a, b)) for r in runs)
        rows.append({"K": K, "gamma": float(np.mean([r.gamma for r in runs])),
                     "eta": float(etas.mean()), "eta_se": se, "bound": float(bounds.mean()),
                     "bound_holds": bool(etas.mean() <= bounds.mean() + SE_SLACK * se),
                     "f_best_monotone": monotone, "windows_ok": windows_ok,
                     "eta_finite": bool(np.all(np.isfinite(etas)))})
    etas = [r["eta"] for r in rows]
    return {"check": "convergence", "objective": objective.kind, "d": len(v0), "l": l, "h": h,
            "repetitions": repetitions, "rows": rows,
            "decreasing": all(a > b for a, b in zip(etas, etas[1:])),
            "first_vs_last": bool(etas[-1] < etas[0]),
            "pass": all(r["bound_holds"] for r in rows) and bool(etas[-1] < etas[0])}


# -- drivers -------------------------------------------------------------------

CHECKS = ("surrogate-bound", "unbiasedness", "smoothing-bound", "convergence")
DEFAULT_CHECKS = CHECKS[:3]


def smoothing_objectives(d, rng):
    """Three Lipschitz objectives with different curvature: affine, cone, nonconvex."""
    return [affine(rng.standard_normal(d), 1.0),
            norm_cone(2.0, rng.standard_normal(d)),
            nonconvex_lipschitz(1.0, 3.0, np.zeros(d))]


def run_check(name, seed=0, frames=None, repetitions=20):
    """Run one named check at its default size; ``frames`` overrides the MC count."""
    rng = np.random.default_rng(seed)
    if name == "surrogate-bound":
        n = frames or 10_000
        reports = [verify_surrogate_bound(2.0, 100, 5, h, n, rng) for h in (0.1, 1.0, 10.0)]
        return {"check": name, "runs": reports, "pass": all(r["pass"] for r in reports)}
    if name == "unbiasedness":
        n = frames or 50_000
        quad = quadratic(np.diag(np.arange(1.0, 7.0)))
        reports = [verify_unbiasedness(quad, np.ones(6), 1.0, 2, n, rng),
                   verify_unbiasedness(affine(np.arange(1.0, 11.0), 0.5), np.zeros(10), 1.0, 3,
                                       min(n, 10_000), rng)]
        return {"check": name, "runs": reports, "pass": all(r["pass"] for r in reports)}
    if name == "smoothing-bound":
        n = frames or 10_000
        d = 10
        reports = []
        for obj in smoothing_objectives(d, rng):
            pts = rng.standard_normal((100, d)) * 3
            reports.append(verify_smoothing_upper_bound(obj, pts, 1.0, n, rng))
        return {"check": name, "runs": reports, "pass": all(r["pass"] for r in reports)}
    if name == "convergence":
        d = 20
        rep = convergence_experiment(norm_cone(1.0, np.zeros(d)), np.eye(d)[0], 5, 0.5,
                                     repetitions=repetitions, seed=seed,
                                     n_grad_samples=frames or 10_000)
        return {"check": name, "runs": [rep], "pass": rep["pass"]}
    raise ValueError(f"unknown check {name!r}; choose from {', '.join(CHECKS)}")
