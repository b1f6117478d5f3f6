"""Placement objectives and reporting metrics.

Three minimized objectives: energy (demand-weighted machine power), resource
waste (unused headroom on powered-on machines) and negated utilization. A
machine hosting nothing draws zero power; an active machine draws
``(p_busy - p_idle) * U + p_idle`` where U is its CPU utilization.

Waste per active machine is ``(max(0, cpu_threshold - U_cpu) + max(0, 1 - U_mem)) / 2``,
so a machine filled exactly to the CPU threshold with full memory wastes
nothing; inactive machines contribute nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import CAPACITY_TOL, Placement, PlacementProblem, _check_placement


@dataclass(frozen=True)
class ObjectiveVector:
    """All three components are minimized; neg_utilization = -U."""

    energy: float
    waste: float
    neg_utilization: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.energy, self.waste, self.neg_utilization)


@dataclass(frozen=True)
class MetricsRow:
    """The six reported criteria for one solver run."""

    energy: float
    waste: float
    active_servers: int
    mean_cpu_utilization: float
    load_balance: float
    processing_time: float


def cpu_utilization(problem: PlacementProblem, placement: Placement, j: int) -> float:
    """Hosted CPU demand on machine j divided by its capacity (0 if empty)."""
    a = _check_placement(problem, placement)
    if not (0 <= j < problem.m):
        raise IndexError(f"machine index {j} out of range [0, {problem.m})")
    load = float(problem.cpu_demands()[a == j].sum())
    return load / problem.pms[j].cpu_capacity


def power(problem: PlacementProblem, placement: Placement, j: int) -> float:
    """Linear idle/busy power at machine j's utilization; exactly 0 when empty."""
    u = cpu_utilization(problem, placement, j)
    if u == 0:
        return 0.0
    pm = problem.pms[j]
    return (pm.p_busy - pm.p_idle) * u + pm.p_idle


def energy(problem: PlacementProblem, placement: Placement) -> float:
    """Sum over machines of hosted CPU demand times machine power."""
    return evaluate(problem, placement).energy


def total_power(problem: PlacementProblem, placement: Placement) -> float:
    """Plain sum of machine powers in watts, for reporting."""
    a = _check_placement(problem, placement)
    loads = np.bincount(a, weights=problem.cpu_demands(), minlength=problem.m)
    u = loads / problem.cpu_capacities()
    active = loads > 0
    p = np.where(active, (problem.busy_powers() - problem.idle_powers()) * u + problem.idle_powers(), 0.0)
    return float(p.sum())


def utilization(problem: PlacementProblem, placement: Placement) -> float:
    """Weighted sum over machines of allocated CPU and memory fractions."""
    a = _check_placement(problem, placement)
    cpu_frac = np.bincount(a, weights=problem.cpu_demands(), minlength=problem.m) / problem.cpu_capacities()
    mem_frac = np.bincount(a, weights=problem.mem_demands(), minlength=problem.m) / problem.mem_capacities()
    return float(problem.alpha * cpu_frac.sum() + problem.beta * mem_frac.sum())


def waste(problem: PlacementProblem, placement: Placement) -> float:
    return evaluate(problem, placement).waste


def evaluate(problem: PlacementProblem, placement: Placement) -> ObjectiveVector:
    """Evaluate all three objectives for a single placement."""
    a = _check_placement(problem, placement)
    objs, _ = PlacementEvaluator(problem).evaluate_batch(a.reshape(1, -1))
    return ObjectiveVector(*(float(v) for v in objs[0]))


def metrics(problem: PlacementProblem, placement: Placement, elapsed: float) -> MetricsRow:
    """Assemble the six reporting criteria; utilization stats cover active machines only."""
    a = _check_placement(problem, placement)
    vec = evaluate(problem, placement)
    loads = np.bincount(a, weights=problem.cpu_demands(), minlength=problem.m)
    u = loads / problem.cpu_capacities()
    active = u[loads > 0]
    return MetricsRow(
        energy=vec.energy,
        waste=vec.waste,
        active_servers=int((loads > 0).sum()),
        mean_cpu_utilization=float(active.mean()) if active.size else 0.0,
        load_balance=float(active.std()) if active.size else 0.0,
        processing_time=float(elapsed),
    )


class PlacementEvaluator:
    """Vectorized batch evaluator with memoization and a request counter.

    ``evaluate_batch`` takes an (k, n) integer assignment matrix and returns
    a (k, 3) objective matrix plus a feasibility mask. ``penalty_offset`` is
    ten times the largest conceivable energy of the instance; solvers add it
    to every objective component of irreparably infeasible candidates so any
    feasible solution dominates them.
    """

    def __init__(self, problem: PlacementProblem):
        self.problem = problem
        self.cpu_demands = problem.cpu_demands()
        self.mem_demands = problem.mem_demands()
        self.cpu_capacities = problem.cpu_capacities()
        self.mem_capacities = problem.mem_capacities()
        self.idle_powers = problem.idle_powers()
        self.busy_powers = problem.busy_powers()
        self.cpu_limits = problem.cpu_threshold * self.cpu_capacities
        self.penalty_offset = 10.0 * float(self.cpu_demands.sum() * self.busy_powers.max())
        self.requests = 0
        self._memo: dict[bytes, tuple[tuple[float, float, float], bool]] = {}

    def machine_loads(self, assignment: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cpu = np.bincount(assignment, weights=self.cpu_demands, minlength=self.problem.m)
        mem = np.bincount(assignment, weights=self.mem_demands, minlength=self.problem.m)
        return cpu, mem

    def _compute(self, assignments: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k, n = assignments.shape
        m = self.problem.m
        rows = np.arange(k)[:, None]
        cpu_loads = np.zeros((k, m))
        mem_loads = np.zeros((k, m))
        np.add.at(cpu_loads, (rows, assignments), self.cpu_demands[None, :])
        np.add.at(mem_loads, (rows, assignments), self.mem_demands[None, :])

        u_cpu = cpu_loads / self.cpu_capacities
        u_mem = mem_loads / self.mem_capacities
        active = cpu_loads > 0
        machine_power = np.where(
            active, (self.busy_powers - self.idle_powers) * u_cpu + self.idle_powers, 0.0
        )
        energy_ = (cpu_loads * machine_power).sum(axis=1)
        waste_ = np.where(
            active,
            (np.clip(self.problem.cpu_threshold - u_cpu, 0, None) + np.clip(1 - u_mem, 0, None)) / 2,
            0.0,
        ).sum(axis=1)
        neg_util = -(
            self.problem.alpha * u_cpu.sum(axis=1) + self.problem.beta * u_mem.sum(axis=1)
        )
        feasible = (cpu_loads <= self.cpu_limits + CAPACITY_TOL).all(axis=1) & (
            mem_loads <= self.mem_capacities + CAPACITY_TOL
        ).all(axis=1)
        return np.column_stack([energy_, waste_, neg_util]), feasible

    def evaluate_batch(self, assignments: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        assignments = np.asarray(assignments, dtype=np.int64)
        k = assignments.shape[0]
        self.requests += k
        objs = np.empty((k, 3))
        feasible = np.empty(k, dtype=bool)
        misses = []
        keys = [assignments[i].tobytes() for i in range(k)]
        for i, key in enumerate(keys):
            hit = self._memo.get(key)
            if hit is None:
                misses.append(i)
            else:
                objs[i] = hit[0]
                feasible[i] = hit[1]
        if misses:
            idx = np.array(misses)
            new_objs, new_feas = self._compute(assignments[idx])
            objs[idx] = new_objs
            feasible[idx] = new_feas
            for pos, i in enumerate(misses):
                self._memo[keys[i]] = (tuple(new_objs[pos]), bool(new_feas[pos]))
        return objs, feasible

    def evaluate_one(self, assignment: np.ndarray) -> tuple[np.ndarray, bool]:
        objs, feasible = self.evaluate_batch(assignment.reshape(1, -1))
        return objs[0], bool(feasible[0])
