"""Differential evolution over antenna positions with a feasibility repair."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ArrayGeometry, batch_secrecy_rates, fmt
from .constellation import SlotScene


@dataclass(frozen=True)
class DeConfig:
    """Differential-evolution settings.

    ``tie_accept`` replaces an individual when the trial is at least as fit;
    switch it off for strict improvement only.  ``single_draw_crossover``
    uses one uniform draw for all dimensions instead of one per dimension.
    """

    population_size: int = 50
    scale_factor: float = 0.9
    crossover_rate: float = 0.9
    generations: int = 30
    repair_cap: int = 50
    penalty: float = 100.0
    tie_accept: bool = True
    single_draw_crossover: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if not 0 < self.scale_factor <= 2:
            raise ValueError("scale_factor must lie in (0, 2]")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.repair_cap < 1:
            raise ValueError("repair_cap must be >= 1")


def de_fitness(
    population: np.ndarray,
    scenes: Sequence[SlotScene],
    plan,
    c_min: float,
    penalty: float = 100.0,
) -> np.ndarray:
    """Average secrecy rate minus ``penalty`` times the total C_min shortfall.

    Accepts one flat 2N vector (returns a scalar array) or a (n_pop, 2N)
    batch.
    """
    pop = np.asarray(population, dtype=float)
    single = pop.ndim == 1
    cs = batch_secrecy_rates(scenes, np.atleast_2d(pop), plan)
    fit = cs.mean(axis=1) - penalty * np.maximum(0.0, c_min - cs).sum(axis=1)
    return fit[0] if single else fit


def mutate(pop: np.ndarray, i: int, F: float, rng: np.random.Generator) -> np.ndarray:
    """c_r1 + F (c_r2 - c_r3) with r1, r2, r3 distinct and different from ``i``."""
    n_pop = pop.shape[0]
    if n_pop < 4:
        raise ValueError("mutation needs at least 4 individuals")
    others = np.delete(np.arange(n_pop), i)
    r1, r2, r3 = rng.choice(others, size=3, replace=False)
    return pop[r1] + F * (pop[r2] - pop[r3])


def crossover(
    v: np.ndarray, c: np.ndarray, rate: float, rng: np.random.Generator, single_draw: bool = False
) -> np.ndarray:
    """Binomial crossover; the forced index always comes from ``v``."""
    v = np.asarray(v, dtype=float)
    c = np.asarray(c, dtype=float)
    if v.shape != c.shape:
        raise ValueError("vectors must have the same length")
    forced = rng.integers(v.size)
    if single_draw:
        take = np.full(v.size, rng.random() < rate)
    else:
        take = rng.random(v.size) < rate
    take[forced] = True
    return np.where(take, v, c)


def separate_pair(a: np.ndarray, b: np.ndarray, d_min: float, rng: np.random.Generator | None = None):
    """Push ``a`` and ``b`` apart symmetrically until they are ``d_min`` apart."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    dist = float(np.linalg.norm(d))
    if dist < 1e-12:
        if rng is None:
            rng = np.random.default_rng()
        theta = rng.uniform(0.0, 2.0 * math.pi)
        unit = np.array([math.cos(theta), math.sin(theta)])
    else:
        unit = d / dist
    shift = 0.5 * (d_min - dist) * unit
    return a - shift, b + shift


@dataclass(frozen=True)
class RepairResult:
    positions: np.ndarray  # flat 2N
    sweeps: int
    shortfall: float  # d_min minus final minimum spacing, clipped at 0

    @property
    def feasible(self) -> bool:
        return self.shortfall <= 1e-9


def _min_spacing(xy: np.ndarray) -> float:
    n = xy.shape[0]
    if n < 2:
        return math.inf
    d = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=-1)
    return float(d[np.triu_indices(n, 1)].min())


def repair(
    u: np.ndarray, side: float, d_min: float, cap: int = 50, rng: np.random.Generator | None = None
) -> RepairResult:
    """Clamp to the square region, then separate too-close pairs.

    Each sweep visits violating pairs in ascending distance order and
    re-clamps afterwards; stops when spacing holds or after ``cap`` sweeps.
    """
    xy = np.clip(np.asarray(u, dtype=float).reshape(-1, 2), 0.0, side)
    n = xy.shape[0]
    iu, ju = np.triu_indices(n, 1)
    limit = d_min * (1.0 - 1e-12)
    sweeps = 0
    while sweeps < cap:
        dist = np.linalg.norm(xy[iu] - xy[ju], axis=1)
        bad = np.flatnonzero(dist < limit)
        if bad.size == 0:
            break
        sweeps += 1
        for k in bad[np.argsort(dist[bad], kind="stable")]:
            i, j = iu[k], ju[k]
            if np.linalg.norm(xy[j] - xy[i]) >= limit:
                continue
            xy[i], xy[j] = separate_pair(xy[i], xy[j], d_min, rng)
        np.clip(xy, 0.0, side, out=xy)
    shortfall = max(0.0, d_min - _min_spacing(xy))
    return RepairResult(xy.ravel(), sweeps, shortfall)


@dataclass
class DeResult:
    geometry: ArrayGeometry
    fitness: float
    trace: list[tuple[int, float, float, int]] = field(default_factory=list)
    evaluations: int = 0

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", "best_fitness", "mean_fitness", "violations"])
            for g, best, mean, viol in self.trace:
                w.writerow([g, fmt(best), fmt(mean), viol])


def _rng(config: DeConfig, stream: tuple[int, ...], *key: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, *stream, *key])


def _evaluate(pop, shortfall, scenes, plan, c_min, config: DeConfig, lam: float) -> np.ndarray:
    # unrepaired spacing costs as much as an equal C_min shortfall in wavelengths
    return de_fitness(pop, scenes, plan, c_min, config.penalty) - config.penalty * shortfall / lam


def de_optimize(
    scenes: Sequence[SlotScene],
    plan,
    config: DeConfig,
    init_geometry: ArrayGeometry,
    c_min: float = 0.0,
    stream: tuple[int, ...] = (),
) -> DeResult:
    """Evolve positions for a fixed beam plan and return the elite.

    ``stream`` extends the seed so that repeated calls (one per outer
    iteration) draw independent but reproducible numbers.
    """
    side, d_min = init_geometry.side, init_geometry.d_min
    lam = scenes[0].wavelength
    dim = init_geometry.flat.size
    n_pop = config.population_size

    rng0 = _rng(config, stream, 0)
    pop = np.empty((n_pop, dim))
    shortfall = np.zeros(n_pop)
    pop[0] = init_geometry.flat
    shortfall[0] = max(0.0, d_min - init_geometry.min_spacing())
    for i in range(1, n_pop):
        rep = repair(rng0.uniform(0.0, side, dim), side, d_min, config.repair_cap, rng0)
        pop[i], shortfall[i] = rep.positions, rep.shortfall
    fit = _evaluate(pop, shortfall, scenes, plan, c_min, config, lam)
    evals = n_pop
    e = int(np.argmax(fit))
    elite, elite_fit, elite_short = pop[e].copy(), float(fit[e]), shortfall[e]
    trace = [(0, elite_fit, float(fit.mean()), int(np.count_nonzero(shortfall > 1e-9)))]

    for g in range(1, config.generations + 1):
        trial = np.empty_like(pop)
        trial_short = np.zeros(n_pop)
        for i in range(n_pop):
            rng = _rng(config, stream, g, i)
            v = mutate(pop, i, config.scale_factor, rng)
            u = crossover(v, pop[i], config.crossover_rate, rng, config.single_draw_crossover)
            rep = repair(u, side, d_min, config.repair_cap, rng)
            trial[i], trial_short[i] = rep.positions, rep.shortfall
        trial_fit = _evaluate(trial, trial_short, scenes, plan, c_min, config, lam)
        evals += n_pop
        better = trial_fit >= fit if config.tie_accept else trial_fit > fit
        pop[better] = trial[better]
        fit[better] = trial_fit[better]
        shortfall[better] = trial_short[better]
        b = int(np.argmax(fit))
        if fit[b] > elite_fit:
            elite, elite_fit, elite_short = pop[b].copy(), float(fit[b]), shortfall[b]
        pop[0], fit[0], shortfall[0] = elite, elite_fit, elite_short
        trace.append((g, elite_fit, float(fit.mean()), int(np.count_nonzero(shortfall > 1e-9))))

    geometry = ArrayGeometry(elite.reshape(-1, 2), side, d_min)
    return DeResult(geometry, elite_fit, trace, evals)
