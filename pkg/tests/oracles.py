"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written in plain Python loops, without
numpy and without importing any solver internals, so that agreement with
the package is meaningful evidence rather than a tautology.
"""

from __future__ import annotations

import itertools
import math


def machine_sums(problem, assignment):
    """Per-machine (cpu, mem) load sums via a direct loop."""
    cpu = [0.0] * problem.m
    mem = [0.0] * problem.m
    for i, j in enumerate(assignment):
        cpu[j] += problem.vms[i].cpu_demand
        mem[j] += problem.vms[i].mem_demand
    return cpu, mem


def feasible(problem, assignment, tol=1e-9):
    cpu, mem = machine_sums(problem, assignment)
    for j, pm in enumerate(problem.pms):
        if cpu[j] > problem.cpu_threshold * pm.cpu_capacity + tol:
            return False
        if mem[j] > pm.mem_capacity + tol:
            return False
    return True


def power_of(pm, u):
    if u <= 0.0:
        return 0.0
    return (pm.p_busy - pm.p_idle) * u + pm.p_idle


def energy_of(problem, assignment):
    cpu, _ = machine_sums(problem, assignment)
    total = 0.0
    for j, pm in enumerate(problem.pms):
        u = cpu[j] / pm.cpu_capacity
        total += cpu[j] * power_of(pm, u)
    return total


def utilization_of(problem, assignment):
    cpu, mem = machine_sums(problem, assignment)
    total = 0.0
    for j, pm in enumerate(problem.pms):
        total += problem.alpha * cpu[j] / pm.cpu_capacity
        total += problem.beta * mem[j] / pm.mem_capacity
    return total


def waste_of(problem, assignment):
    cpu, mem = machine_sums(problem, assignment)
    total = 0.0
    for j, pm in enumerate(problem.pms):
        if cpu[j] == 0.0 and mem[j] == 0.0:
            continue
        cpu_gap = max(problem.cpu_threshold - cpu[j] / pm.cpu_capacity, 0.0)
        mem_gap = max(1.0 - mem[j] / pm.mem_capacity, 0.0)
        total += (cpu_gap + mem_gap) / 2.0
    return total


def objective_of(problem, assignment):
    return (
        energy_of(problem, assignment),
        waste_of(problem, assignment),
        -utilization_of(problem, assignment),
    )


def enumerate_optimum(problem):
    """Exhaustive minimum-energy feasible assignment, or None."""
    best = None
    best_key = None
    for assignment in itertools.product(range(problem.m), repeat=problem.n):
        if not feasible(problem, assignment):
            continue
        e, w, nu = objective_of(problem, assignment)
        key = (e, w, nu, assignment)
        if best_key is None or key < best_key:
            best_key = key
            best = assignment
    return best


def pstdev(values):
    if not values:
        return 0.0
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
