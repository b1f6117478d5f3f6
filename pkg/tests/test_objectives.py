import itertools

import numpy as np
import pytest

import vmplace as vp
from vmplace.objectives import PlacementEvaluator

import oracles


def _problem(pms, vms, **kw):
    return vp.PlacementProblem(tuple(pms), tuple(vms), **kw)


def _pm(j, cpu, mem, idle, busy):
    return vp.PhysicalMachine(j, cpu_capacity=cpu, mem_capacity=mem, p_idle=idle, p_busy=busy)


def _vm(i, cpu, mem):
    return vp.VirtualMachine(i, cpu_demand=cpu, mem_demand=mem)


class TestCpuUtilization:
    def test_empty_machine_is_zero(self, tiny_problem):
        placement = vp.Placement((1, 1))
        assert vp.cpu_utilization(tiny_problem, placement, 0) == 0.0

    def test_half_load(self):
        problem = _problem([_pm(0, 10, 16, 150, 250)], [_vm(0, 5, 8)])
        assert vp.cpu_utilization(problem, vp.Placement((0,)), 0) == pytest.approx(0.5)

    def test_index_out_of_range(self, tiny_problem):
        with pytest.raises(IndexError):
            vp.cpu_utilization(tiny_problem, vp.Placement((0, 1)), 5)

    def test_matches_summation_oracle(self, fixture_problem):
        for a in itertools.product(range(3), repeat=5):
            placement = vp.Placement(a)
            cpu, _ = oracles.machine_sums(fixture_problem, a)
            for j, pm in enumerate(fixture_problem.pms):
                expect = cpu[j] / pm.cpu_capacity
                assert vp.cpu_utilization(fixture_problem, placement, j) == pytest.approx(expect)


class TestPower:
    def test_idle_machine_draws_nothing(self):
        problem = _problem([_pm(0, 10, 16, 150, 250), _pm(1, 10, 16, 150, 250)], [_vm(0, 5, 8)])
        assert vp.power(problem, vp.Placement((0,)), 1) == 0.0

    def test_full_load_draws_busy_power(self):
        full = _problem([_pm(0, 9, 16, 150, 250)], [_vm(0, 9, 8)], cpu_threshold=1.0)
        assert vp.power(full, vp.Placement((0,)), 0) == pytest.approx(250.0)

    def test_interpolation_point(self):
        problem = _problem([_pm(0, 10, 16, 150, 250)], [_vm(0, 4, 8)])
        assert vp.power(problem, vp.Placement((0,)), 0) == pytest.approx(190.0, abs=1e-9)

    def test_discontinuity_at_zero(self):
        # power tends to p_idle as U -> 0+ but is exactly 0 at U = 0.
        pm = _pm(0, 1000.0, 1000.0, 150, 250)
        problem = _problem([pm, _pm(1, 10, 16, 150, 250)], [_vm(0, 0.001, 0.001)])
        on = vp.power(problem, vp.Placement((0,)), 0)
        assert on == pytest.approx(150.0, rel=1e-4)
        assert vp.power(problem, vp.Placement((1,)), 0) == 0.0

    def test_monotone_in_utilization(self):
        pm = _pm(0, 100, 1000, 150, 250)
        values = []
        for k in range(1, 10):
            problem = _problem([pm], [_vm(0, 10.0 * k, 1.0)], cpu_threshold=1.0)
            values.append(vp.power(problem, vp.Placement((0,)), 0))
        assert all(a <= b for a, b in zip(values, values[1:]))


class TestEnergy:
    def test_worked_example(self):
        problem = _problem([_pm(0, 10, 16, 150, 250)], [_vm(0, 5, 8)])
        # U = 0.5, P = 200 W, E = 5 x 200 = 1000.
        assert vp.energy(problem, vp.Placement((0,))) == pytest.approx(1000.0)

    def test_matches_oracle_on_all_assignments(self, fixture_problem):
        for a in itertools.product(range(3), repeat=5):
            expect = oracles.energy_of(fixture_problem, a)
            assert vp.energy(fixture_problem, vp.Placement(a)) == pytest.approx(expect, rel=1e-9)

    def test_total_power_matches_oracle(self, fixture_problem):
        for a in itertools.product(range(3), repeat=5):
            cpu, _ = oracles.machine_sums(fixture_problem, a)
            expect = sum(
                oracles.power_of(pm, cpu[j] / pm.cpu_capacity)
                for j, pm in enumerate(fixture_problem.pms)
            )
            got = vp.total_power(fixture_problem, vp.Placement(a))
            assert got == pytest.approx(expect, rel=1e-9)

    def test_permutation_invariance(self, fixture_problem):
        a = (0, 1, 2, 1, 0)
        perm = [3, 0, 4, 1, 2]
        vms = tuple(
            vp.VirtualMachine(i, fixture_problem.vms[perm[i]].cpu_demand,
                              fixture_problem.vms[perm[i]].mem_demand)
            for i in range(5)
        )
        relabeled = vp.PlacementProblem(fixture_problem.pms, vms,
                                        cpu_threshold=fixture_problem.cpu_threshold)
        b = tuple(a[perm[i]] for i in range(5))
        assert vp.energy(relabeled, vp.Placement(b)) == pytest.approx(
            vp.energy(fixture_problem, vp.Placement(a)))
        assert vp.utilization(relabeled, vp.Placement(b)) == pytest.approx(
            vp.utilization(fixture_problem, vp.Placement(a)))


class TestUtilization:
    def test_single_vm_worked_example(self):
        problem = _problem([_pm(0, 10, 16, 150, 250)], [_vm(0, 5, 8)])
        assert vp.utilization(problem, vp.Placement((0,))) == pytest.approx(1.0)

    def test_matches_oracle(self, fixture_problem):
        for a in itertools.product(range(3), repeat=5):
            expect = oracles.utilization_of(fixture_problem, a)
            got = vp.utilization(fixture_problem, vp.Placement(a))
            assert got == pytest.approx(expect, rel=1e-9)

    def test_weights_scale_terms(self):
        problem = _problem([_pm(0, 10, 16, 150, 250)], [_vm(0, 5, 8)], alpha=2.0, beta=0.5)
        assert vp.utilization(problem, vp.Placement((0,))) == pytest.approx(2 * 0.5 + 0.5 * 0.5)


class TestWaste:
    def test_perfectly_packed_machine_wastes_nothing(self):
        problem = _problem([_pm(0, 10, 16, 150, 250)], [_vm(0, 9, 16)], cpu_threshold=0.9)
        assert vp.waste(problem, vp.Placement((0,))) == pytest.approx(0.0, abs=1e-12)

    def test_inactive_machines_contribute_nothing(self):
        problem = _problem(
            [_pm(0, 10, 16, 150, 250), _pm(1, 10, 16, 150, 250)],
            [_vm(0, 9, 16)],
            cpu_threshold=0.9,
        )
        assert vp.waste(problem, vp.Placement((0,))) == pytest.approx(0.0, abs=1e-12)

    def test_half_empty_machine(self):
        problem = _problem([_pm(0, 10, 16, 150, 250)], [_vm(0, 4.5, 8)], cpu_threshold=0.9)
        # CPU gap (0.9 - 0.45) plus memory gap (1 - 0.5), halved.
        assert vp.waste(problem, vp.Placement((0,))) == pytest.approx((0.45 + 0.5) / 2)

    def test_matches_oracle(self, fixture_problem):
        for a in itertools.product(range(3), repeat=5):
            expect = oracles.waste_of(fixture_problem, a)
            got = vp.waste(fixture_problem, vp.Placement(a))
            assert got == pytest.approx(expect, rel=1e-9, abs=1e-12)


class TestEvaluateAndMetrics:
    def test_evaluate_bundles_components(self, fixture_problem):
        placement = vp.Placement((0, 1, 2, 1, 0))
        vec = vp.evaluate(fixture_problem, placement)
        assert vec.energy == pytest.approx(vp.energy(fixture_problem, placement))
        assert vec.waste == pytest.approx(vp.waste(fixture_problem, placement))
        assert vec.neg_utilization == pytest.approx(-vp.utilization(fixture_problem, placement))

    def test_single_active_machine_balance_zero(self):
        problem = _problem([_pm(0, 10, 16, 150, 250)], [_vm(0, 5, 8)])
        row = vp.metrics(problem, vp.Placement((0,)), elapsed=1.5)
        assert row.active_servers == 1
        assert row.load_balance == 0.0
        assert row.processing_time == 1.5

    def test_two_machine_balance(self):
        problem = _problem(
            [_pm(0, 10, 160, 150, 250), _pm(1, 10, 160, 150, 250)],
            [_vm(0, 2, 1), _vm(1, 8, 1)],
            cpu_threshold=0.9,
        )
        row = vp.metrics(problem, vp.Placement((0, 1)), elapsed=0.0)
        assert row.active_servers == 2
        assert row.mean_cpu_utilization == pytest.approx(0.5)
        assert row.load_balance == pytest.approx(0.3)

    def test_balance_matches_pstdev_oracle(self, fixture_problem):
        for a in itertools.product(range(3), repeat=5):
            cpu, _ = oracles.machine_sums(fixture_problem, a)
            utils = [
                cpu[j] / pm.cpu_capacity
                for j, pm in enumerate(fixture_problem.pms)
                if cpu[j] > 0
            ]
            row = vp.metrics(fixture_problem, vp.Placement(a), elapsed=0.0)
            assert row.load_balance == pytest.approx(oracles.pstdev(utils), abs=1e-12)
            assert row.active_servers == len(utils)

    def test_moving_vm_to_empty_machine_grows_active_set(self, fixture_problem):
        a = [0, 0, 0, 0, 0]
        before = vp.metrics(fixture_problem, vp.Placement(tuple(a)), 0.0).active_servers
        a[4] = 2
        after = vp.metrics(fixture_problem, vp.Placement(tuple(a)), 0.0).active_servers
        assert after >= before


class TestEvaluatorBatch:
    def test_batch_matches_scalar_functions(self, fixture_problem):
        ev = PlacementEvaluator(fixture_problem)
        rng = np.random.default_rng(5)
        batch = rng.integers(3, size=(50, 5))
        objs, feas = ev.evaluate_batch(batch)
        for row, a in zip(objs, batch):
            expect = oracles.objective_of(fixture_problem, tuple(int(v) for v in a))
            assert tuple(row) == pytest.approx(expect, rel=1e-9, abs=1e-12)
        for flag, a in zip(feas, batch):
            assert bool(flag) == oracles.feasible(fixture_problem, tuple(int(v) for v in a))

    def test_memoization_counts_requests(self, fixture_problem):
        ev = PlacementEvaluator(fixture_problem)
        batch = np.zeros((4, 5), dtype=np.int64)
        ev.evaluate_batch(batch)
        ev.evaluate_batch(batch)
        assert ev.requests == 8

    def test_neg_utilization_bound(self, fixture_problem):
        ev = PlacementEvaluator(fixture_problem)
        rng = np.random.default_rng(6)
        batch = rng.integers(3, size=(200, 5))
        objs, feas = ev.evaluate_batch(batch)
        m = fixture_problem.m
        for row, flag in zip(objs, feas):
            if flag:
                assert -(2 * m) <= row[2] <= 0.0
                assert row[0] >= 0.0 and row[1] >= 0.0
