"""Generic GA and PSO placement solvers used as comparison baselines.

Both optimize scalar energy (infeasible candidates go through the same
repair-then-penalize pipeline as the main solver) and are meant to be run
at a matched candidate-evaluation budget. They are deliberately standard
textbook variants, not reproductions of any particular published system.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .instance import Placement, PlacementProblem, first_fit_decreasing
from .lamocs import (
    NoFeasibleSolutionError,
    Solution,
    SolveResult,
    _process_keys,
    repair_assignment,
)
from .objectives import ObjectiveVector, PlacementEvaluator


@dataclass(frozen=True)
class GaParams:
    population_size: int = 100
    max_cycles: int = 500
    crossover_rate: float = 0.9
    mutation_rate: Optional[float] = None  # defaults to 1/n per gene
    tournament_size: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be even and at least 2")
        if not (0 <= self.crossover_rate <= 1):
            raise ValueError("crossover_rate must be in [0, 1]")
        if self.mutation_rate is not None and not (0 <= self.mutation_rate <= 1):
            raise ValueError("mutation_rate must be in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")


@dataclass(frozen=True)
class PsoParams:
    population_size: int = 100
    max_cycles: int = 500
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not (0 <= self.inertia <= 1):
            raise ValueError("inertia must be in [0, 1]")
        if self.cognitive <= 0 or self.social <= 0:
            raise ValueError("cognitive and social factors must be positive")


def _process_assignments(evaluator, assignments, rng):
    """Repair-then-penalize pipeline for integer-encoded candidates."""
    m = evaluator.problem.m
    assignments = np.array(assignments, dtype=np.int64, copy=True)
    objs, feasible = evaluator.evaluate_batch(assignments)
    for i in np.flatnonzero(~feasible):
        fixed, _ = repair_assignment(evaluator, assignments[i], rng)
        if (fixed != assignments[i]).any():
            assignments[i] = fixed
            objs[i], feasible[i] = evaluator.evaluate_one(fixed)
        if not feasible[i]:
            objs[i] = objs[i] + evaluator.penalty_offset
    return assignments, objs, feasible


def _result(evaluator, best_assignment, best_obj, history, t0, candidates) -> SolveResult:
    if best_assignment is None:
        raise NoFeasibleSolutionError("no feasible placement found within the budget")
    solution = Solution(
        keys=tuple(float(j) + 0.5 for j in best_assignment),
        placement=Placement(tuple(int(j) for j in best_assignment)),
        objectives=ObjectiveVector(*(float(v) for v in best_obj)),
        feasible=True,
    )
    return SolveResult(
        pareto_front=[solution],
        best=solution,
        history=history,
        elapsed=time.perf_counter() - t0,
        evaluations=candidates,
    )


def ga_solve(problem: PlacementProblem, params: GaParams = GaParams()) -> SolveResult:
    """Tournament selection, uniform crossover, per-gene uniform mutation."""
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(params.seed)))
    pop, n, m = params.population_size, problem.n, problem.m
    p_mut = params.mutation_rate if params.mutation_rate is not None else 1.0 / n

    evaluator = PlacementEvaluator(problem)
    population = rng.integers(m, size=(pop, n))
    seeded = first_fit_decreasing(problem)
    if seeded is not None:
        # Same feasible anchor the main solver gets, so comparisons stay fair.
        population[0] = np.asarray(seeded.assignment)
    population, objs, feasible = _process_assignments(evaluator, population, rng)
    candidates = pop
    fitness = objs[:, 0]

    best_assignment = None
    best_obj = None
    best_fit = np.inf
    history: list[tuple[float, int]] = []

    def track(assignments, objs_, feasible_):
        nonlocal best_assignment, best_obj, best_fit
        for i in np.flatnonzero(feasible_):
            if objs_[i, 0] < best_fit:
                best_fit = objs_[i, 0]
                best_assignment = assignments[i].copy()
                best_obj = objs_[i].copy()

    track(population, objs, feasible)
    for _ in range(params.max_cycles):
        # Tournament selection of pop parents.
        entries = rng.integers(pop, size=(pop, params.tournament_size))
        parents = entries[np.arange(pop), np.argmin(fitness[entries], axis=1)]
        offspring = population[parents].copy()
        for a in range(0, pop, 2):
            if rng.random() < params.crossover_rate:
                mask = rng.random(n) < 0.5
                tmp = offspring[a, mask].copy()
                offspring[a, mask] = offspring[a + 1, mask]
                offspring[a + 1, mask] = tmp
        mut = rng.random((pop, n)) < p_mut
        offspring[mut] = rng.integers(m, size=int(mut.sum()))
        offspring, off_objs, off_feasible = _process_assignments(evaluator, offspring, rng)
        candidates += pop
        track(offspring, off_objs, off_feasible)
        population, objs, feasible = offspring, off_objs, off_feasible
        fitness = objs[:, 0]
        history.append((best_fit, 1))
    return _result(evaluator, best_assignment, best_obj, history, t0, candidates)


def pso_solve(problem: PlacementProblem, params: PsoParams = PsoParams()) -> SolveResult:
    """Random-key PSO: inertia plus cognitive/social pulls, positions wrapped to [0, m)."""
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(params.seed)))
    pop, n, m = params.population_size, problem.n, problem.m
    evaluator = PlacementEvaluator(problem)

    positions = rng.uniform(0.0, m, (pop, n))
    seeded = first_fit_decreasing(problem)
    if seeded is not None:
        # Same feasible anchor the main solver gets, so comparisons stay fair.
        positions[0] = np.asarray(seeded.assignment) + 0.5
    velocities = np.zeros((pop, n))
    positions, assignments, objs, feasible = _process_keys(evaluator, positions, rng)
    candidates = pop

    pbest_pos = positions.copy()
    pbest_fit = objs[:, 0].copy()
    g = int(np.argmin(pbest_fit))
    gbest_pos = pbest_pos[g].copy()
    gbest_fit = float(pbest_fit[g])

    best_assignment = None
    best_obj = None
    best_fit = np.inf
    history: list[tuple[float, int]] = []

    def track(assignments_, objs_, feasible_):
        nonlocal best_assignment, best_obj, best_fit
        for i in np.flatnonzero(feasible_):
            if objs_[i, 0] < best_fit:
                best_fit = objs_[i, 0]
                best_assignment = assignments_[i].copy()
                best_obj = objs_[i].copy()

    track(assignments, objs, feasible)
    for _ in range(params.max_cycles):
        r1 = rng.random((pop, n))
        r2 = rng.random((pop, n))
        velocities = (
            params.inertia * velocities
            + params.cognitive * r1 * (pbest_pos - positions)
            + params.social * r2 * (gbest_pos - positions)
        )
        positions = np.mod(positions + velocities, m)
        positions, assignments, objs, feasible = _process_keys(evaluator, positions, rng)
        candidates += pop
        track(assignments, objs, feasible)
        improved = objs[:, 0] < pbest_fit
        pbest_pos[improved] = positions[improved]
        pbest_fit[improved] = objs[improved, 0]
        g = int(np.argmin(pbest_fit))
        if pbest_fit[g] < gbest_fit:
            gbest_fit = float(pbest_fit[g])
            gbest_pos = pbest_pos[g].copy()
        history.append((best_fit, 1))
    return _result(evaluator, best_assignment, best_obj, history, t0, candidates)
