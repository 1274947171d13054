import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zexe.optim import (GeneticExplorer, NonFiniteObjectiveError, adaptive_stepsize,
                        armijo_linesearch, central_surrogate, explore_resample,
                        forward_surrogate, ga_explore, inverse_sqrt_stepsize, langevin_beta,
                        langevin_step, sample_direction_frame, smoothing_update)
from zexe.optim.explore import tournament, uniform_crossover


# -- frames --------------------------------------------------------------------

def test_frame_d1():
    signs = [sample_direction_frame(1, 1, np.random.default_rng(s)).columns[0, 0] for s in range(400)]
    assert set(np.round(signs, 12)) == {-1.0, 1.0}
    assert 150 < sum(x > 0 for x in signs) < 250


def test_frame_orthonormal():
    f = sample_direction_frame(8, 3, np.random.default_rng(7))
    assert f.columns.shape == (8, 3) and (f.d, f.l) == (8, 3)
    assert np.allclose(f.columns.T @ f.columns, np.eye(3), atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.data(), st.integers(0, 2**32 - 1))
def test_frame_orthonormal_property(d, data, seed):
    l = data.draw(st.integers(1, min(d, 8)))
    f = sample_direction_frame(d, l, np.random.default_rng(seed))
    assert np.allclose(f.columns.T @ f.columns, np.eye(l), atol=1e-10)


@pytest.mark.parametrize("d, l", [(3, 4), (5, 0)])
def test_frame_invalid(d, l):
    with pytest.raises(ValueError):
        sample_direction_frame(d, l, np.random.default_rng(0))


def test_frame_haar_marginal():
    # first column of a Haar matrix is uniform on the sphere: mean 0, covariance I/d
    rng = np.random.default_rng(2024)
    n, d = 100_000, 4
    cols = np.array([sample_direction_frame(d, d, rng).columns[:, 0] for _ in range(n)])
    mean, se = cols.mean(0), cols.std(0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(mean) <= 3 * se)
    outer = cols[:, :, None] * cols[:, None, :]
    cov, cov_se = outer.mean(0), outer.std(0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(cov - np.eye(d) / d) <= 3 * cov_se + 1e-12)


# -- surrogates ----------------------------------------------------------------

class Counter:
    def __init__(self, f):
        self.f, self.calls = f, 0

    def __call__(self, x):
        self.calls += 1
        return self.f(x)


def test_forward_constant_is_zero(rng):
    f = Counter(lambda x: 3.0)
    g = forward_surrogate(f, rng.normal(size=10), sample_direction_frame(10, 4, rng), 0.7)
    assert np.all(g.vector == 0) and g.norm_sq == 0
    assert f.calls == 5 and len(g.eval_cache) == 5


def test_forward_linear_full_frame(rng):
    a = rng.normal(size=12)
    g = forward_surrogate(lambda x: a @ x, rng.normal(size=12), sample_direction_frame(12, 12, rng), 0.3)
    assert np.allclose(g.vector, a, rtol=1e-9, atol=1e-9)


def test_forward_reuses_f_v(rng):
    f = Counter(lambda x: float(x.sum()))
    v = rng.normal(size=6)
    g = forward_surrogate(f, v, sample_direction_frame(6, 2, rng), 1.0, f_v=float(v.sum()))
    assert f.calls == 2 and g.values[0] == float(v.sum())


def test_forward_l1_symmetric_mean():
    rng = np.random.default_rng(11)
    d, l, n = 10, 5, 20_000
    gs = np.array([forward_surrogate(lambda x: np.abs(x).sum(), np.zeros(d),
                                     sample_direction_frame(d, l, rng), 0.5).vector for _ in range(n)])
    se = gs.std(0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(gs.mean(0)) <= 3 * se)


def test_norm_sq_consistent(rng):
    g = forward_surrogate(lambda x: float(np.sin(x).sum()), rng.normal(size=30),
                          sample_direction_frame(30, 5, rng), 0.1)
    assert math.isclose(g.norm_sq, float(g.vector @ g.vector), rel_tol=1e-12)


def test_central_affine_exact(rng):
    a = rng.normal(size=7)
    f = Counter(lambda x: a @ x + 4.0)
    g = central_surrogate(f, rng.normal(size=7), sample_direction_frame(7, 7, rng), 2.0)
    assert np.allclose(g.vector, a, atol=1e-9)
    assert f.calls == 14


def test_central_constant(rng):
    g = central_surrogate(lambda x: -1.0, rng.normal(size=5), sample_direction_frame(5, 2, rng), 1.0)
    assert g.norm_sq == 0


def test_central_quadratic_unbiased():
    rng = np.random.default_rng(5)
    A = np.diag(np.arange(1.0, 7.0))
    v = np.ones(6)
    n = 50_000
    gs = np.array([central_surrogate(lambda x: x @ A @ x, v, sample_direction_frame(6, 2, rng), 1.0).vector
                   for _ in range(n)])
    se = gs.std(0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(gs.mean(0) - 2 * A @ v) <= 3 * se)


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_nonfinite_objective_identifies_probe(rng, bad):
    calls = iter([1.0, 2.0, bad])
    with pytest.raises(NonFiniteObjectiveError) as exc:
        forward_surrogate(lambda x: next(calls), np.zeros(4), sample_direction_frame(4, 3, rng), 1.0)
    assert "p[1]" in str(exc.value) and exc.value.point.shape == (4,)


def test_lipschitz_bound_holds_exactly():
    rng = np.random.default_rng(9)
    d, l, L = 100, 5, 2.0
    for _ in range(300):
        g = forward_surrogate(lambda x: L * np.linalg.norm(x), rng.normal(size=d) * 5,
                              sample_direction_frame(d, l, rng), float(rng.uniform(0.1, 10)))
        assert g.norm_sq <= d * d * L * L / l * (1 + 1e-12)


# -- schedules -----------------------------------------------------------------

@pytest.mark.parametrize("f, gsq, expected", [(1.0, 1.0, 1.0), (100, 0.01, 10), (0.001, 100, 0.1)])
def test_adaptive_stepsize(f, gsq, expected):
    assert adaptive_stepsize(f, gsq, 0.1, 10) == expected


def test_adaptive_zero_norm():
    with pytest.raises(RuntimeError):
        adaptive_stepsize(1.0, 0.0, 0.1, 10)


@pytest.mark.parametrize("h, gsq, expected", [(8, 1, 4), (1, 1, 1), (2, 1e-6, 8), (3, 1e-4, 1.5)])
def test_smoothing_update(h, gsq, expected):
    assert smoothing_update(h, gsq, 1e-4, 8, 1) == expected


def test_inverse_sqrt_and_beta():
    assert inverse_sqrt_stepsize(0) == 1.0
    assert math.isclose(inverse_sqrt_stepsize(3, 2.0), 1.0)
    assert math.isclose(langevin_beta(0), 0.5 * math.log(2) / 2)
    assert abs(langevin_beta(0) - 0.1733) < 1e-4


def test_armijo_quadratic_accepts_early():
    f = lambda x: float(x @ x)
    v = 10 * np.eye(3)[0]
    res = armijo_linesearch(f, v, 2 * v, f(v), budget_remaining=100)
    assert res.accepted and res.trials <= 2
    assert f(v - res.step * 2 * v) <= f(v) - 1e-4 * res.step * float(4 * v @ v)


def test_armijo_at_minimum_exhausts():
    res = armijo_linesearch(lambda x: float(x @ x), np.zeros(2), np.array([1.0, 0.0]), 0.0, 100)
    assert not res.accepted and res.trials == 10
    assert res.step == 0.5**10


def test_armijo_formula_three_trials():
    res = armijo_linesearch(lambda x: 1.0, np.zeros(2), np.ones(2), 1.0, 100, shrink=0.5, max_trials=3)
    assert res.step == 0.125 and res.trials == 3


def test_armijo_budget_exhausted():
    vals = iter([5.0, 3.0, 4.0])
    res = armijo_linesearch(lambda x: next(vals), np.zeros(2), np.ones(2), 1.0, budget_remaining=3)
    assert res.budget_exhausted and res.trials == 3 and res.step == 0.5


# -- exploration ---------------------------------------------------------------

def test_resample_bounds_and_determinism():
    v = explore_resample(100_000, (32, 126), np.random.default_rng(1))
    assert v.min() >= 32 and v.max() <= 126
    w = explore_resample(3, (0, 256), np.random.default_rng(1))
    assert np.all((0 <= w) & (w <= 256))
    assert np.array_equal(explore_resample(50, (0, 256), np.random.default_rng(4)),
                          explore_resample(50, (0, 256), np.random.default_rng(4)))


def test_langevin_zero_beta_is_descent(rng):
    v, g = rng.normal(size=20), rng.normal(size=20)
    assert np.array_equal(langevin_step(v, g, 0.3, 0.0, rng), v - 0.3 * g)


def test_langevin_noise_variance():
    rng = np.random.default_rng(8)
    n = 100_000
    delta = langevin_step(np.zeros(n), np.zeros(n), 5.0, 0.5, rng)
    var = delta.var(ddof=1)
    se = math.sqrt(2 / (n - 1))  # SE of the sample variance of a unit Gaussian
    assert abs(var - 1.0) <= 3 * se


def test_langevin_negative_beta():
    with pytest.raises(ValueError):
        langevin_step(np.zeros(2), np.zeros(2), 1.0, -0.1, np.random.default_rng(0))


def test_tournament_probability():
    fitness = np.array([0.1, 0.9])
    rng = np.random.default_rng(77)
    wins = sum(tournament(fitness, 2, rng) == 0 for _ in range(10_000))
    p = wins / 10_000
    assert abs(p - 0.75) <= 3 * math.sqrt(0.75 * 0.25 / 10_000)


def test_ga_p2_parents_favor_fitter():
    hits, trials = 0, 0
    for seed in range(2_000):
        rng = np.random.default_rng(seed)
        ga = GeneticExplorer(4, (0, 256), rng, population=2, mutation_rate=0.0, crossover_rate=0.0)
        for val in (0.1, 0.9):
            ga.next_candidate(rng)
            ga.record(val)
        best = ga.members[0].copy()
        ga.evolve(rng)
        hits += sum(np.array_equal(m, best) for m in ga.members)
        trials += 2
    assert hits / trials >= 0.75 - 3 * math.sqrt(0.1875 / trials)


def test_ga_degenerate_operators_copy_parents():
    rng = np.random.default_rng(3)
    ga = GeneticExplorer(6, (0, 256), rng, population=4, mutation_rate=0.0, crossover_rate=0.0)
    parents = ga.members.copy()
    ga.fitness[:] = [0.4, 0.3, 0.2, 0.1]
    ga.evolve(rng)
    for child in ga.members:
        assert any(np.array_equal(child, p) for p in parents)


def test_ga_fresh_returns_member0():
    rng = np.random.default_rng(0)
    ga = GeneticExplorer(5, (32, 126), rng)
    first = ga.members[0].copy()
    cand, state = ga_explore(ga, rng)
    assert np.array_equal(cand, first) and state is ga and ga.cursor == 1


def test_ga_new_generation_after_consumption():
    rng = np.random.default_rng(0)
    ga = GeneticExplorer(5, (32, 126), rng, population=3)
    for i in range(3):
        ga.next_candidate(rng)
        ga.record(float(i))
    assert ga.generation == 0
    ga.next_candidate(rng)
    assert ga.generation == 1 and ga.cursor == 1
    assert np.all((ga.members >= 32) & (ga.members <= 126))


def test_uniform_crossover_swaps_complementarily(rng):
    a, b = np.zeros(1000), np.ones(1000)
    c1, c2 = uniform_crossover(a, b, 1.0, rng)
    assert np.array_equal(c1 + c2, np.ones(1000))
    assert 400 < c1.sum() < 600


def test_ga_population_too_small():
    with pytest.raises(ValueError):
        GeneticExplorer(3, (0, 1), np.random.default_rng(0), population=1)
