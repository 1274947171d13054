"""Exploration moves used when the surrogate gradient is too small to trust."""

import math

import numpy as np


def explore_resample(d, bounds, rng):
    """Uniform draw from the box ``[lo, hi]^d``."""
    lo, hi = bounds
    return rng.uniform(lo, hi, size=d)


def langevin_step(v, g, gamma, beta, rng):
    """Gradient step plus Gaussian noise: ``v - gamma g + sqrt(2 beta) xi``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    xi = rng.standard_normal(np.shape(v))
    return v - gamma * g + math.sqrt(2 * beta) * xi


def tournament(fitness, size, rng):
    """Index of the fittest (lowest) of ``size`` members drawn with replacement."""
    picks = rng.integers(0, len(fitness), size=size)
    return int(picks[np.argmin(fitness[picks])])


def uniform_crossover(a, b, rate, rng):
    if rng.random() >= rate:
        return a.copy(), b.copy()
    mask = rng.random(a.shape[0]) < 0.5
    return np.where(mask, b, a), np.where(mask, a, b)


def mutate(x, rate, bounds, rng):
    if rate <= 0:
        return x
    hit = rng.random(x.shape[0]) < rate
    n = int(hit.sum())
    if n:
        x = x.copy()
        x[hit] = rng.uniform(bounds[0], bounds[1], size=n)
    return x


class GeneticExplorer:
    """Population of candidate perturbations handed out one at a time.

    The attack loop takes candidates with :meth:`next_candidate` and reports
    each candidate's objective value through :meth:`record` once it has been
    evaluated. When every member has been handed out the population is
    replaced by tournament selection, uniform crossover and uniform mutation.
    """

    def __init__(self, d, bounds, rng, population=10, mutation_rate=0.01,
                 crossover_rate=1.0, tournament_size=2):
        if population < 2:
            raise ValueError("genetic exploration needs a population of at least 2")
        self.bounds = bounds
        self.mutation_rate = mutation_rate
        self.crossover_rate = crossover_rate
        self.tournament_size = tournament_size
        self.members = rng.uniform(bounds[0], bounds[1], size=(population, d))
        self.fitness = np.full(population, np.inf)
        self.cursor = 0
        self.generation = 0
        self._pending = None

    @property
    def size(self):
        return self.members.shape[0]

    def record(self, value):
        """Attach ``value`` to the most recently issued member."""
        if self._pending is not None:
            self.fitness[self._pending] = value
            self._pending = None

    def evolve(self, rng):
        p = self.size
        children = []
        while len(children) < p:
            a = self.members[tournament(self.fitness, self.tournament_size, rng)]
            b = self.members[tournament(self.fitness, self.tournament_size, rng)]
            for child in uniform_crossover(a, b, self.crossover_rate, rng):
                children.append(mutate(child, self.mutation_rate, self.bounds, rng))
        self.members = np.array(children[:p])
        self.fitness = np.full(p, np.inf)
        self.cursor = 0
        self.generation += 1

    def next_candidate(self, rng):
        if self.cursor >= self.size:
            self.evolve(rng)
        i = self.cursor
        self.cursor += 1
        self._pending = i
        return self.members[i].copy()


def ga_explore(explorer, rng):
    """Functional wrapper: next candidate and the (mutated in place) state."""
    return explorer.next_candidate(rng), explorer
