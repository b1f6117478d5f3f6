import pytest

import vmplace as vp
from vmplace.experiments import matched_budget_cycles
from vmplace.lamocs import NoFeasibleSolutionError

import oracles


class TestParams:
    def test_ga_rejects_odd_population(self):
        with pytest.raises(ValueError):
            vp.GaParams(population_size=7)

    def test_ga_rejects_bad_rates(self):
        with pytest.raises(ValueError):
            vp.GaParams(crossover_rate=1.5)
        with pytest.raises(ValueError):
            vp.GaParams(mutation_rate=-0.1)

    def test_pso_rejects_bad_factors(self):
        with pytest.raises(ValueError):
            vp.PsoParams(inertia=1.5)
        with pytest.raises(ValueError):
            vp.PsoParams(cognitive=0.0)


class TestGa:
    def test_trivial_instance(self):
        p = vp.generate_instance(1, 1, 7)
        result = vp.ga_solve(p, vp.GaParams(population_size=4, max_cycles=2, seed=0))
        assert result.best.placement.assignment == (0,)

    def test_determinism(self, fixture_problem):
        params = vp.GaParams(population_size=10, max_cycles=20, seed=3)
        a = vp.ga_solve(fixture_problem, params)
        b = vp.ga_solve(fixture_problem, params)
        assert a.best == b.best
        assert a.history == b.history

    def test_respects_oracle_bound(self, fixture_problem):
        optimum = oracles.enumerate_optimum(fixture_problem)
        floor = oracles.energy_of(fixture_problem, optimum)
        for seed in range(5):
            result = vp.ga_solve(fixture_problem, vp.GaParams(population_size=10, max_cycles=30, seed=seed))
            assert result.best.objectives.energy >= floor - 1e-9
            assert oracles.feasible(fixture_problem, result.best.placement.assignment)

    def test_history_nonincreasing(self, fixture_problem):
        result = vp.ga_solve(fixture_problem, vp.GaParams(population_size=10, max_cycles=30, seed=1))
        fits = [f for f, _ in result.history]
        assert all(a >= b - 1e-12 for a, b in zip(fits, fits[1:]))

    def test_infeasible_raises(self):
        pm = vp.PhysicalMachine(0, cpu_capacity=10.0, mem_capacity=10.0, p_idle=1.0, p_busy=2.0)
        vms = (vp.VirtualMachine(0, cpu_demand=9.9, mem_demand=1.0),)
        problem = vp.PlacementProblem((pm,), vms, cpu_threshold=0.9)
        with pytest.raises(NoFeasibleSolutionError):
            vp.ga_solve(problem, vp.GaParams(population_size=4, max_cycles=3, seed=0))


class TestPso:
    def test_trivial_instance(self):
        p = vp.generate_instance(1, 1, 7)
        result = vp.pso_solve(p, vp.PsoParams(population_size=4, max_cycles=2, seed=0))
        assert result.best.placement.assignment == (0,)

    def test_determinism(self, fixture_problem):
        params = vp.PsoParams(population_size=10, max_cycles=20, seed=3)
        a = vp.pso_solve(fixture_problem, params)
        b = vp.pso_solve(fixture_problem, params)
        assert a.best == b.best
        assert a.history == b.history

    def test_respects_oracle_bound(self, fixture_problem):
        optimum = oracles.enumerate_optimum(fixture_problem)
        floor = oracles.energy_of(fixture_problem, optimum)
        for seed in range(5):
            result = vp.pso_solve(fixture_problem, vp.PsoParams(population_size=10, max_cycles=30, seed=seed))
            assert result.best.objectives.energy >= floor - 1e-9
            assert oracles.feasible(fixture_problem, result.best.placement.assignment)

    def test_stationary_without_attraction(self, fixture_problem):
        # Zero initial velocities and c1 = c2 = 0 leave positions unchanged,
        # so every cycle revisits the same swarm.
        eps = 1e-12
        params = vp.PsoParams(
            population_size=6, max_cycles=5, inertia=0.7, cognitive=eps, social=eps, seed=0
        )
        result = vp.pso_solve(fixture_problem, params)
        fits = [f for f, _ in result.history]
        assert all(f == fits[0] for f in fits)

    def test_history_nonincreasing(self, fixture_problem):
        result = vp.pso_solve(fixture_problem, vp.PsoParams(population_size=10, max_cycles=30, seed=1))
        fits = [f for f, _ in result.history]
        assert all(a >= b - 1e-12 for a, b in zip(fits, fits[1:]))


class TestBudgetParity:
    def test_evaluation_counts_match_within_five_percent(self):
        p = vp.generate_instance(4, 20, 9)
        lam = vp.SolverParams(population_size=20, max_cycles=40, seed=0)
        cycles = matched_budget_cycles(lam)
        r_lam = vp.solve(p, lam)
        r_ga = vp.ga_solve(p, vp.GaParams(population_size=20, max_cycles=cycles, seed=0))
        r_pso = vp.pso_solve(p, vp.PsoParams(population_size=20, max_cycles=cycles, seed=0))
        for r in (r_ga, r_pso):
            assert abs(r.evaluations - r_lam.evaluations) <= 0.05 * r_lam.evaluations
