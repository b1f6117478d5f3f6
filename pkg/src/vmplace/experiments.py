"""Evaluation protocol: VM-count sweeps, population-size sweeps, Pareto snapshots.

Every (vm_count, repetition) cell generates one instance from a sub-seed
derived with SeedSequence([base_seed, vm_count, repetition]); all three
solvers run on that same instance (verified by a content hash recorded per
row). Baseline cycle counts are stretched so GA and PSO consume the same
candidate-evaluation budget as the main solver.

The machine pool scales with the VM count (one machine per 5 VMs by
default) so that aggregate demand, and with it energy, grows across the
sweep while the generator's >=90% load rule stays satisfiable.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import GaParams, PsoParams, ga_solve, pso_solve
from .instance import GeneratorConfig, generate_instance, instance_hash, validate_placement
from .lamocs import SolverParams, solve
from .objectives import MetricsRow, metrics

VMS_PER_PM = 5

CSV_HEADER = (
    "solver", "vm_count", "pop_size", "repetition", "seed", "instance_hash",
    "energy", "waste", "active_servers", "mean_cpu_utilization",
    "load_balance", "processing_time",
)

SOLVERS = ("lamocs", "ga", "pso")


class ExperimentError(RuntimeError):
    """A sweep cell failed; the message carries its coordinates."""


def matched_budget_cycles(params: SolverParams, population_size: Optional[int] = None) -> int:
    """Baseline cycle count consuming the same candidate budget as `params`.

    The main solver evaluates pop + cycles * (pop + ceil(pa * pop))
    candidates; a baseline evaluates pop per cycle plus the initial pop.
    """
    pop = population_size or params.population_size
    per_cycle = pop + math.ceil(params.pa * pop)
    total = pop + params.max_cycles * per_cycle
    return max(1, round((total - pop) / pop))


@dataclass(frozen=True)
class ScenarioConfig:
    """Sweep layout plus per-solver parameter templates (seeds set per cell).

    The default solver budget (pop 50, 150 cycles) keeps the full default
    sweep at desk scale; the headline single-run settings (pop 100, 500
    cycles) remain the SolverParams defaults.
    """

    vm_counts: tuple[int, ...] = (20, 40, 60, 80, 100)
    pm_count: Optional[int] = None  # None: one machine per VMS_PER_PM VMs
    repetitions: int = 10
    base_seed: int = 1
    lamocs: SolverParams = SolverParams(population_size=50, max_cycles=150)
    ga: Optional[GaParams] = None  # None: budget-matched to `lamocs`
    pso: Optional[PsoParams] = None
    generator: GeneratorConfig = GeneratorConfig()

    def __post_init__(self):
        object.__setattr__(self, "vm_counts", tuple(int(v) for v in self.vm_counts))
        if not self.vm_counts or list(self.vm_counts) != sorted(set(self.vm_counts)):
            raise ValueError("vm_counts must be nonempty and strictly ascending")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        cycles = matched_budget_cycles(self.lamocs)
        if self.ga is None:
            object.__setattr__(
                self, "ga",
                GaParams(population_size=self.lamocs.population_size, max_cycles=cycles),
            )
        if self.pso is None:
            object.__setattr__(
                self, "pso",
                PsoParams(population_size=self.lamocs.population_size, max_cycles=cycles),
            )

    def resolved_pm_count(self, vm_count: int) -> int:
        if self.pm_count is not None:
            return self.pm_count
        return max(2, vm_count // VMS_PER_PM)


@dataclass(frozen=True)
class ExperimentRecord:
    solver: str
    vm_count: int
    pop_size: int
    repetition: int
    seed: int
    instance_hash: str
    metrics: MetricsRow


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def _solver_params(config: ScenarioConfig, solver: str, seed: int, pop_size: Optional[int]):
    if solver == "lamocs":
        params = replace(config.lamocs, seed=seed)
        if pop_size is not None:
            params = replace(params, population_size=pop_size)
        return params
    if solver == "ga":
        params = replace(config.ga, seed=seed)
    else:
        params = replace(config.pso, seed=seed)
    if pop_size is not None:
        params = replace(
            params,
            population_size=pop_size,
            max_cycles=matched_budget_cycles(config.lamocs, pop_size),
        )
    return params


def _run_cell(args) -> list[ExperimentRecord]:
    config, vm_count, rep, pop_size = args
    try:
        pm_count = config.resolved_pm_count(vm_count)
        instance_seed = _derive_seed(config.base_seed, vm_count, rep)
        problem = generate_instance(pm_count, vm_count, instance_seed, config.generator)
        digest = instance_hash(problem)
        records = []
        for idx, solver in enumerate(SOLVERS):
            solver_seed = _derive_seed(config.base_seed, vm_count, rep, idx)
            params = _solver_params(config, solver, solver_seed, pop_size)
            if solver == "lamocs":
                result = solve(problem, params)
            elif solver == "ga":
                result = ga_solve(problem, params)
            else:
                result = pso_solve(problem, params)
            report = validate_placement(problem, result.best.placement)
            if not report.feasible:
                raise ExperimentError(f"{solver} returned an infeasible placement")
            row = metrics(problem, result.best.placement, result.elapsed)
            records.append(
                ExperimentRecord(
                    solver=solver,
                    vm_count=vm_count,
                    pop_size=pop_size if pop_size is not None else params.population_size,
                    repetition=rep,
                    seed=instance_seed,
                    instance_hash=digest,
                    metrics=row,
                )
            )
        return records
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(
            f"sweep cell failed at vm_count={vm_count}, repetition={rep}"
            + (f", pop_size={pop_size}" if pop_size is not None else "")
            + f": {exc}"
        ) from exc


def _run_cells(cells, jobs: int) -> list[ExperimentRecord]:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            groups = list(pool.map(_run_cell, cells))
    else:
        groups = [_run_cell(cell) for cell in cells]
    records = [record for group in groups for record in group]
    records.sort(key=lambda r: (r.solver, r.vm_count, r.pop_size, r.repetition))
    return records


def run_vm_sweep(config: ScenarioConfig, jobs: int = 1) -> list[ExperimentRecord]:
    """All three solvers over every (vm_count, repetition) cell."""
    cells = [
        (config, vm_count, rep, None)
        for vm_count in config.vm_counts
        for rep in range(config.repetitions)
    ]
    return _run_cells(cells, jobs)


def run_popsize_sweep(
    config: ScenarioConfig,
    pop_sizes: Sequence[int],
    fixed_vm_count: int = 100,
    jobs: int = 1,
) -> list[ExperimentRecord]:
    """Vary population size at a fixed VM count; one instance per repetition."""
    if not pop_sizes:
        raise ValueError("pop_sizes must be nonempty")
    cells = [
        (config, fixed_vm_count, rep, int(pop_size))
        for pop_size in pop_sizes
        for rep in range(config.repetitions)
    ]
    return _run_cells(cells, jobs)


def snapshot_pareto(problem, params: SolverParams, at_cycles: Sequence[int]):
    """Archive contents (energy, waste, neg_utilization rows) at chosen cycles."""
    cycles = sorted(set(int(c) for c in at_cycles))
    if not cycles or cycles[0] < 1 or cycles[-1] > params.max_cycles:
        raise ValueError(f"at_cycles must lie within [1, {params.max_cycles}]")
    result = solve(problem, params, snapshot_cycles=cycles)
    return result.snapshots


def _num(x) -> str:
    return repr(int(x)) if isinstance(x, (int, np.integer)) else repr(float(x))


def emit_csv(records: Sequence[ExperimentRecord], path) -> None:
    """Fixed-header CSV, UTF-8, LF line endings, full-precision numbers."""
    if not records:
        raise ValueError("no records to emit")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.solver, r.vm_count, r.pop_size, r.repetition, r.seed, r.instance_hash,
                    _num(r.metrics.energy), _num(r.metrics.waste),
                    r.metrics.active_servers, _num(r.metrics.mean_cpu_utilization),
                    _num(r.metrics.load_balance), _num(r.metrics.processing_time),
                ]
            )


def _columnar(records, x_attr: str, metric: str, path: Path) -> None:
    xs = sorted(set(getattr(r, x_attr) for r in records))
    lines = ["# " + x_attr + "".join(f" {s}_mean {s}_std" for s in SOLVERS)]
    for x in xs:
        cols = [str(x)]
        for solver in SOLVERS:
            vals = np.array(
                [
                    getattr(r.metrics, metric)
                    for r in records
                    if r.solver == solver and getattr(r, x_attr) == x
                ]
            )
            if vals.size:
                cols += [repr(float(vals.mean())), repr(float(vals.std()))]
            else:
                cols += ["nan", "nan"]
        lines.append(" ".join(cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_plot_data(records: Sequence[ExperimentRecord], out_dir) -> list[Path]:
    """Plot-ready columnar files (mean and std per x-value per solver).

    Energy and waste are plotted against the VM count; when the records
    span several population sizes, processing time is plotted against
    population size instead.
    """
    if not records:
        raise ValueError("no records to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if len(set(r.pop_size for r in records)) > 1:
        path = out / "processing_time_vs_pop_size.dat"
        _columnar(records, "pop_size", "processing_time", path)
        written.append(path)
    else:
        for metric in ("energy", "waste"):
            path = out / f"{metric}_vs_vm_count.dat"
            _columnar(records, "vm_count", metric, path)
            written.append(path)
    return written
