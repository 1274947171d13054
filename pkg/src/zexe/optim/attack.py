"""The attack loop shared by ZEXE, its exploration variants, OZD and random search."""

from dataclasses import dataclass, field, asdict, replace
import math

import numpy as np

from .explore import GeneticExplorer, explore_resample, langevin_step
from .frames import sample_direction_frame
from .steps import (adaptive_stepsize, armijo_linesearch, inverse_sqrt_stepsize,
                    langevin_beta, smoothing_update)
from .surrogates import NonFiniteObjectiveError, central_surrogate, forward_surrogate

ALGOS = ("zexe", "zexe-lan", "zexe-ga", "ozd", "rs")
PRINTABLE_BOUNDS = (32.0, 127.0)
FULL_BOUNDS = (0.0, 256.0)


@dataclass(frozen=True)
class StepPolicy:
    """How the descent step size is chosen.

    ``kind`` is one of ``adaptive`` (clamped ``F / ||g||^2``), ``constant``,
    ``inverse_sqrt`` (``gamma / sqrt(k + 1)``) or ``armijo``.
    """

    kind: str = "adaptive"
    gamma_lo: float = 1.0
    gamma_hi: float = 1e6
    gamma: float = 1.0
    shrink: float = 0.5
    max_trials: int = 10
    initial: float = 1.0

    def __post_init__(self):
        if self.kind not in ("adaptive", "constant", "inverse_sqrt", "armijo"):
            raise ValueError(f"unknown step policy {self.kind!r}")
        if self.kind == "adaptive" and not 0 < self.gamma_lo <= self.gamma_hi:
            raise ValueError("adaptive steps need 0 < gamma_lo <= gamma_hi")
        if self.kind == "armijo" and (self.max_trials < 1 or not 0 < self.shrink < 1):
            raise ValueError("armijo needs max_trials >= 1 and 0 < shrink < 1")


@dataclass(frozen=True)
class OptimizerConfig:
    """Everything an attack run needs besides the objective and start point.

    ``mode`` selects the algorithm family: ``zexe`` branches on the surrogate
    norm, ``ozd`` always descends (central surrogate, no exploration) and
    ``rs`` always explores without building a surrogate.
    """

    mode: str = "zexe"
    l: int = 5
    omega: float = 1e-4
    budget: int = 1000
    step: StepPolicy = field(default_factory=StepPolicy)
    h0: float = 8.0
    h_min: float = 1.0
    explore: str = "resample"
    beta_scale: float = 1.0
    population: int = 10
    mutation_rate: float = 0.01
    crossover_rate: float = 1.0
    tournament_size: int = 2
    surrogate: str = "forward"
    bounds: tuple = PRINTABLE_BOUNDS
    threshold: float | None = None

    def __post_init__(self):
        if self.mode not in ("zexe", "ozd", "rs"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.explore not in ("resample", "langevin", "genetic"):
            raise ValueError(f"unknown exploration strategy {self.explore!r}")
        if self.surrogate not in ("forward", "central"):
            raise ValueError(f"unknown surrogate {self.surrogate!r}")
        if self.l < 1:
            raise ValueError("l must be positive")
        if not (self.h_min > 0 and self.h0 >= self.h_min):
            raise ValueError("need h0 >= h_min > 0")
        if self.explore == "genetic" and self.population < 2:
            raise ValueError("genetic exploration needs population >= 2")
        lo, hi = self.bounds
        if not 0 <= lo < hi <= 256:
            raise ValueError(f"invalid sampling bounds {self.bounds}")
        if self.budget <= 0:
            raise ValueError("budget must be positive")

    @property
    def per_iteration(self):
        """Evaluations charged by one iteration, line-search trials excluded."""
        if self.mode == "rs":
            return 1
        if self.surrogate == "central":
            return 2 * self.l + 1
        return self.l + 1

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "step" in data and isinstance(data["step"], dict):
            data["step"] = StepPolicy(**data["step"])
        if "bounds" in data:
            data["bounds"] = tuple(data["bounds"])
        return cls(**data)


def preset(algo, **overrides):
    """Default configuration for one of :data:`ALGOS`.

    Defaults follow the low-dimensional (printable window) setting. Keyword
    arguments override fields; ``step`` may be given as a dict of overrides.
    """
    step_over = overrides.pop("step", None)
    adaptive = StepPolicy(kind="adaptive", gamma_lo=1e3, gamma_hi=1e6)
    if algo == "zexe":
        cfg = OptimizerConfig(step=adaptive)
    elif algo == "zexe-lan":
        cfg = OptimizerConfig(explore="langevin", step=adaptive)
    elif algo == "zexe-ga":
        cfg = OptimizerConfig(explore="genetic", step=adaptive)
    elif algo == "ozd":
        cfg = OptimizerConfig(mode="ozd", surrogate="central", h0=100.0, h_min=100.0,
                              step=StepPolicy(kind="inverse_sqrt", gamma=1.0))
    elif algo == "rs":
        cfg = OptimizerConfig(mode="rs")
    else:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGOS)}")
    if step_over:
        step = step_over if isinstance(step_over, StepPolicy) else replace(cfg.step, **step_over)
        overrides["step"] = step
    return replace(cfg, **overrides)


class BudgetExhausted(RuntimeError):
    pass


class CountedObjective:
    """Charges every call against a budget and remembers the first evasive query."""

    def __init__(self, objective, budget, threshold=None):
        self.objective = objective
        self.budget = budget
        self.threshold = threshold
        self.calls = 0
        self.first_below = None

    @property
    def remaining(self):
        return self.budget - self.calls

    def __call__(self, x):
        if self.calls >= self.budget:
            raise BudgetExhausted(f"query budget of {self.budget} exhausted")
        self.calls += 1
        value = float(self.objective(x))
        if self.first_below is None and self.threshold is not None and value < self.threshold:
            self.first_below = self.calls
        return value


@dataclass
class AttackState:
    v: np.ndarray
    v_best: np.ndarray
    f_best: float
    h: float
    k: int = 0
    queries_used: int = 0
    f_v: float | None = None
    explore_state: object = None


def update_best(state, candidates, values):
    """Move the incumbent to the lowest-valued candidate, if strictly better.

    The cached best is treated as listed last, so ties keep the incumbent.
    No objective evaluations happen here.
    """
    if len(candidates) != len(values):
        raise ValueError(f"{len(candidates)} candidates but {len(values)} values")
    if not values:
        return state
    i = int(np.argmin(values))
    if values[i] < state.f_best:
        state.v_best = np.array(candidates[i], dtype=np.float64, copy=True)
        state.f_best = float(values[i])
    return state


@dataclass(frozen=True)
class IterationRecord:
    k: int
    branch: str
    h: float
    gamma: float
    g_norm_sq: float
    f_v: float
    f_best: float
    queries: int


@dataclass
class AttackResult:
    v_best: np.ndarray
    f_best: float
    f_initial: float
    queries_used: int
    evaded: bool
    queries_to_evasion: int | None
    trace: list
    config: OptimizerConfig
    error: str | None = None
    iterates: list | None = None

    @property
    def iterations(self):
        return len(self.trace)

    def trace_rows(self):
        return [asdict(r) for r in self.trace]


def _spawn(seed):
    # SFC64 draws normals and uniforms markedly faster than PCG64 at d ~ 1e5
    ss = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.SFC64(s)) for s in ss.spawn(3)]


def run_attack(objective, v0, config, seed=0, record_iterates=False):
    """Minimize ``objective`` from ``v0`` under ``config``.

    The run stops when the query budget cannot pay for another iteration or,
    if ``config.threshold`` is set, as soon as the best value drops below it.
    Objective failures end the run early with a partial trace and ``error`` set.
    With ``record_iterates`` the point ``v_k`` of every iteration is kept.
    """
    cfg = config
    v0 = np.array(v0, dtype=np.float64, copy=True)
    d = v0.shape[0]
    if cfg.mode != "rs" and cfg.l > d:
        raise ValueError(f"l={cfg.l} exceeds dimension {d}")
    if cfg.budget < cfg.per_iteration:
        raise ValueError(f"budget {cfg.budget} cannot pay for one iteration ({cfg.per_iteration} queries)")

    frame_rng, explore_rng, noise_rng = _spawn(seed)
    f = CountedObjective(objective, cfg.budget, cfg.threshold)
    state = AttackState(v=v0, v_best=v0.copy(), f_best=math.inf, h=cfg.h0)
    if cfg.explore == "genetic" and cfg.mode == "zexe":
        state.explore_state = GeneticExplorer(
            d, cfg.bounds, explore_rng, cfg.population, cfg.mutation_rate,
            cfg.crossover_rate, cfg.tournament_size)
    trace = []
    iterates = [] if record_iterates else None
    f_initial = None
    error = None

    def evaded():
        return cfg.threshold is not None and state.f_best < cfg.threshold

    try:
        while f.remaining >= cfg.per_iteration and not evaded():
            k = state.k
            if cfg.mode == "rs":
                fv = f(state.v)
                if f_initial is None:
                    f_initial = fv
                update_best(state, [state.v], [fv])
                trace.append(IterationRecord(k, "explore", state.h, 0.0, 0.0, fv, state.f_best, f.calls))
                state.v = explore_resample(d, cfg.bounds, explore_rng)
                state.k += 1
                continue

            if iterates is not None:
                iterates.append(state.v.copy())
            frame = sample_direction_frame(d, cfg.l, frame_rng)
            if cfg.surrogate == "forward":
                sg = forward_surrogate(f, state.v, frame, state.h)
                fv = sg.values[0]
                points, values = sg.points, sg.values
            else:
                fv = f(state.v)
                sg = central_surrogate(f, state.v, frame, state.h)
                points, values = [state.v] + sg.points, [fv] + sg.values
            if f_initial is None:
                f_initial = fv
                state.v_best, state.f_best = state.v.copy(), fv
            if isinstance(state.explore_state, GeneticExplorer):
                state.explore_state.record(fv)
            state.f_v = fv
            update_best(state, points, values)

            g, gsq = sg.vector, sg.norm_sq
            descend = cfg.mode == "ozd" or gsq >= cfg.omega
            gamma = 0.0
            if descend and gsq > 0:
                gamma = _step_size(cfg, state, f, g, gsq, fv)
            h_used = state.h

            if cfg.explore == "langevin" and cfg.mode == "zexe":
                beta = cfg.beta_scale * langevin_beta(k)
                state.v = langevin_step(state.v, g, gamma, beta, noise_rng)
                branch = "langevin"
            elif descend:
                state.v = state.v - gamma * g
                branch = "descent"
            elif cfg.explore == "genetic":
                state.v = state.explore_state.next_candidate(explore_rng)
                branch = "explore"
            else:
                state.v = explore_resample(d, cfg.bounds, explore_rng)
                branch = "explore"
            if cfg.mode != "ozd":
                state.h = smoothing_update(state.h, gsq, cfg.omega, cfg.h0, cfg.h_min)
            trace.append(IterationRecord(k, branch, h_used, gamma, gsq, fv, state.f_best, f.calls))
            state.k += 1
    except (NonFiniteObjectiveError, BudgetExhausted) as exc:
        error = str(exc)
    except Exception as exc:  # objective failure: keep the partial trace
        error = f"{type(exc).__name__}: {exc}"

    state.queries_used = f.calls
    return AttackResult(
        v_best=state.v_best,
        f_best=state.f_best,
        f_initial=f_initial if f_initial is not None else math.nan,
        queries_used=f.calls,
        evaded=evaded(),
        queries_to_evasion=f.first_below if evaded() else None,
        trace=trace,
        config=cfg,
        error=error,
        iterates=iterates,
    )


def _step_size(cfg, state, f, g, gsq, fv):
    pol = cfg.step
    if pol.kind == "adaptive":
        return adaptive_stepsize(fv, gsq, pol.gamma_lo, pol.gamma_hi)
    if pol.kind == "constant":
        return pol.gamma
    if pol.kind == "inverse_sqrt":
        return inverse_sqrt_stepsize(state.k, pol.gamma)
    ls = armijo_linesearch(f, state.v, g, fv, f.remaining, pol.shrink, pol.max_trials, pol.initial)
    update_best(state, ls.points, ls.values)
    return ls.step
