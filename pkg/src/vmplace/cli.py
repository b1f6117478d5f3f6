"""Command-line entry point.

Subcommands: gen, solve, compare, sweep, pareto, report. Human-readable
summaries go to stdout; machine data goes to files. Every command that
writes output also writes a JSON sidecar with the fully resolved
configuration; feeding that sidecar back via --config reproduces the run.

Exit codes: 0 success, 2 usage or generation failure, 3 no feasible
solution, 4 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import baselines, experiments, lamocs
from .instance import (
    GenerationInfeasibleError,
    GeneratorConfig,
    InstanceError,
    InstanceParseError,
    generate_instance,
    instance_hash,
    read_instance,
    write_instance,
)
from .objectives import metrics

EXIT_USAGE = 2
EXIT_NO_SOLUTION = 3
EXIT_IO = 4


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _float_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'low,high', got '{text}'")
    return (float(parts[0]), float(parts[1]))


def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cpu-range", type=_float_pair, default=(4.0, 16.0), help="PM CPU GHz interval")
    p.add_argument("--mem-range", type=_float_pair, default=(8.0, 32.0), help="PM memory GB interval")
    p.add_argument("--load-fraction", type=float, default=0.9,
                   help="minimum total VM CPU demand as a fraction of total PM capacity")
    p.add_argument("--power-range", type=_float_pair, default=(200.0, 300.0), help="busy power W interval")
    p.add_argument("--idle-ratio", type=float, default=0.6, help="p_idle / p_busy")
    p.add_argument("--cpu-threshold", type=float, default=0.95,
                   help="per-machine usable CPU fraction of generated instances")


def _generator_config(args) -> GeneratorConfig:
    return GeneratorConfig(
        cpu_range=tuple(args.cpu_range),
        mem_range=tuple(args.mem_range),
        load_fraction=args.load_fraction,
        power_range=tuple(args.power_range),
        idle_ratio=args.idle_ratio,
        cpu_threshold=args.cpu_threshold,
    )


def _add_solver_flags(p: argparse.ArgumentParser, pop: int = 100, cycles: int = 500) -> None:
    p.add_argument("--seed", type=int, default=0, help="solver RNG seed")
    p.add_argument("--pop", type=int, default=pop, help="population size")
    p.add_argument("--cycles", type=int, default=cycles, help="number of generations")
    p.add_argument("--pa", type=float, default=0.25, help="abandon fraction")
    p.add_argument("--levy-beta", type=float, default=1.5, help="Levy stability index")
    p.add_argument("--penalty-factor", type=float, default=0.5, help="automata penalty factor")
    p.add_argument("--reward-factor", type=float, default=0.5, help="automata reward factor")


def _solver_params(args) -> lamocs.SolverParams:
    return lamocs.SolverParams(
        population_size=args.pop,
        max_cycles=args.cycles,
        pa=args.pa,
        levy_beta=args.levy_beta,
        penalty_factor=args.penalty_factor,
        reward_factor=args.reward_factor,
        seed=args.seed,
    )


def _write_sidecar(path: Path, command: str, args: argparse.Namespace) -> None:
    payload = {"command": command}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config"):
            continue
        if isinstance(value, tuple):
            value = list(value)
        elif isinstance(value, Path):
            value = str(value)
        payload[key] = value
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt_num(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------- subcommands

def cmd_gen(args) -> int:
    problem = generate_instance(args.pms, args.vms, args.seed, _generator_config(args))
    write_instance(problem, args.output)
    _write_sidecar(Path(str(args.output) + ".config.json"), "gen", args)
    total_cap = sum(pm.cpu_capacity for pm in problem.pms)
    total_dem = sum(vm.cpu_demand for vm in problem.vms)
    print(f"instance written: {args.output}")
    print(f"seed: {args.seed}")
    print(f"machines: {problem.m}  vms: {problem.n}")
    print(f"total cpu capacity: {total_cap:.3f} GHz  total cpu demand: {total_dem:.3f} GHz")
    print(f"load ratio: {total_dem / total_cap:.4f}")
    print(f"instance hash: {instance_hash(problem)}")
    return 0


def cmd_solve(args) -> int:
    problem = read_instance(args.instance)
    params = _solver_params(args)
    if args.solver == "lamocs":
        result = lamocs.solve(problem, params)
    elif args.solver == "ga":
        result = baselines.ga_solve(
            problem,
            baselines.GaParams(population_size=args.pop, max_cycles=args.cycles, seed=args.seed),
        )
    elif args.solver == "pso":
        result = baselines.pso_solve(
            problem,
            baselines.PsoParams(population_size=args.pop, max_cycles=args.cycles, seed=args.seed),
        )
    else:
        sol = lamocs.brute_force(problem)
        result = lamocs.SolveResult(pareto_front=[sol], best=sol, history=[], elapsed=0.0)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    best = result.best
    placement_lines = [f"{i} {j}" for i, j in enumerate(best.placement.assignment)]
    (out / "placement.txt").write_text("\n".join(placement_lines) + "\n", encoding="utf-8")
    obj = best.objectives
    (out / "objectives.dat").write_text(
        "# energy waste neg_utilization\n"
        f"{_fmt_num(obj.energy)} {_fmt_num(obj.waste)} {_fmt_num(obj.neg_utilization)}\n",
        encoding="utf-8",
    )
    if args.front:
        rows = [
            " ".join(_fmt_num(v) for v in sol.objectives.as_tuple())
            for sol in sorted(result.pareto_front, key=lambda s: s.objectives.as_tuple())
        ]
        (out / "front.dat").write_text(
            "# energy waste neg_utilization\n" + "\n".join(rows) + "\n", encoding="utf-8"
        )
    _write_sidecar(out / "run_config.json", "solve", args)

    row = metrics(problem, best.placement, result.elapsed)
    print(f"solver: {args.solver}  seed: {args.seed}")
    print(f"best energy: {row.energy:.6f}")
    print(f"waste: {row.waste:.6f}  utilization: {-obj.neg_utilization:.6f}")
    print(f"active servers: {row.active_servers} of {problem.m}")
    print(f"elapsed: {result.elapsed:.3f} s")
    return 0


def cmd_compare(args) -> int:
    problem = read_instance(args.instance)
    digest = instance_hash(problem)
    lam = replace(
        experiments.ScenarioConfig().lamocs,
        population_size=args.pop, max_cycles=args.cycles, seed=args.seed,
    )
    cycles = experiments.matched_budget_cycles(lam)
    runs = [
        ("lamocs", lambda: lamocs.solve(problem, lam)),
        ("ga", lambda: baselines.ga_solve(
            problem, baselines.GaParams(population_size=args.pop, max_cycles=cycles, seed=args.seed))),
        ("pso", lambda: baselines.pso_solve(
            problem, baselines.PsoParams(population_size=args.pop, max_cycles=cycles, seed=args.seed))),
    ]
    records = []
    for name, run in runs:
        result = run()
        row = metrics(problem, result.best.placement, result.elapsed)
        records.append(
            experiments.ExperimentRecord(
                solver=name, vm_count=problem.n, pop_size=args.pop, repetition=0,
                seed=args.seed, instance_hash=digest, metrics=row,
            )
        )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    experiments.emit_csv(records, out / "compare.csv")
    _write_sidecar(out / "run_config.json", "compare", args)
    print(f"instance: {args.instance}  (hash {digest[:12]})  seed: {args.seed}")
    print(f"{'solver':8} {'energy':>14} {'waste':>10} {'servers':>8} {'time':>8}")
    for r in records:
        print(
            f"{r.solver:8} {r.metrics.energy:14.4f} {r.metrics.waste:10.4f} "
            f"{r.metrics.active_servers:8d} {r.metrics.processing_time:8.3f}"
        )
    return 0


def cmd_sweep(args) -> int:
    config = experiments.ScenarioConfig(
        vm_counts=tuple(args.vm_counts),
        pm_count=args.pm_count,
        repetitions=args.reps,
        base_seed=args.base_seed,
        lamocs=replace(
            experiments.ScenarioConfig().lamocs,
            population_size=args.pop, max_cycles=args.cycles,
        ),
        generator=_generator_config(args),
    )
    if args.pop_sizes:
        records = experiments.run_popsize_sweep(
            config, args.pop_sizes, fixed_vm_count=args.fixed_vm_count, jobs=args.jobs
        )
    else:
        records = experiments.run_vm_sweep(config, jobs=args.jobs)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    experiments.emit_csv(records, out / "records.csv")
    written = experiments.emit_plot_data(records, out)
    _write_sidecar(out / "run_config.json", "sweep", args)
    print(f"base seed: {args.base_seed}")
    print(f"records: {len(records)} -> {out / 'records.csv'}")
    for path in written:
        print(f"plot data: {path}")
    return 0


def cmd_pareto(args) -> int:
    problem = read_instance(args.instance)
    params = _solver_params(args)
    snapshots = experiments.snapshot_pareto(problem, params, args.at)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for cycle, rows in sorted(snapshots.items()):
        path = out / f"front_cycle{cycle}.dat"
        lines = ["# energy waste neg_utilization"]
        for row in sorted(rows):
            lines.append(" ".join(_fmt_num(v) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"cycle {cycle}: {len(rows)} front members -> {path}")
    _write_sidecar(out / "run_config.json", "pareto", args)
    print(f"seed: {args.seed}")
    return 0


def cmd_report(args) -> int:
    records = _read_records_csv(Path(args.records))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    written = experiments.emit_plot_data(records, out)
    _write_sidecar(out / "run_config.json", "report", args)
    xs = sorted(set((r.vm_count, r.pop_size) for r in records))
    print(f"{'solver':8} {'vms':>5} {'pop':>5} {'mean energy':>14} {'mean waste':>12}")
    for vm_count, pop_size in xs:
        for solver in experiments.SOLVERS:
            vals = [
                r.metrics for r in records
                if r.solver == solver and r.vm_count == vm_count and r.pop_size == pop_size
            ]
            if not vals:
                continue
            e = sum(v.energy for v in vals) / len(vals)
            w = sum(v.waste for v in vals) / len(vals)
            print(f"{solver:8} {vm_count:5d} {pop_size:5d} {e:14.4f} {w:12.4f}")
    for path in written:
        print(f"plot data: {path}")
    return 0


def _read_records_csv(path: Path) -> list[experiments.ExperimentRecord]:
    import csv as _csv

    from .objectives import MetricsRow

    with open(path, encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames != list(experiments.CSV_HEADER):
            raise InstanceParseError(f"unexpected CSV header in {path}")
        records = []
        for row in reader:
            records.append(
                experiments.ExperimentRecord(
                    solver=row["solver"],
                    vm_count=int(row["vm_count"]),
                    pop_size=int(row["pop_size"]),
                    repetition=int(row["repetition"]),
                    seed=int(row["seed"]),
                    instance_hash=row["instance_hash"],
                    metrics=MetricsRow(
                        energy=float(row["energy"]),
                        waste=float(row["waste"]),
                        active_servers=int(row["active_servers"]),
                        mean_cpu_utilization=float(row["mean_cpu_utilization"]),
                        load_balance=float(row["load_balance"]),
                        processing_time=float(row["processing_time"]),
                    ),
                )
            )
    return records


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmplace",
        description="Energy-aware virtual machine placement toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random instance file")
    p.add_argument("--pms", type=int, required=True, help="number of physical machines")
    p.add_argument("--vms", type=int, required=True, help="number of virtual machines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="instance file to write")
    _add_generator_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve one instance with a chosen solver")
    p.add_argument("instance", help="instance file")
    p.add_argument("--solver", choices=("lamocs", "ga", "pso", "brute"), default="lamocs")
    _add_solver_flags(p)
    p.add_argument("--front", action="store_true", help="also dump the Pareto front")
    p.add_argument("-o", "--output", default="solve-out", help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run all three solvers on one instance")
    p.add_argument("instance", help="instance file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pop", type=int, default=50)
    p.add_argument("--cycles", type=int, default=150)
    p.add_argument("-o", "--output", default="compare-out", help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="run the VM-count or population-size sweep")
    p.add_argument("--vm-counts", type=_int_list, default=[20, 40, 60, 80, 100])
    p.add_argument("--pm-count", type=int, default=None,
                   help="fixed machine count (default: scales with the VM count)")
    p.add_argument("--reps", type=int, default=10, help="repetitions per cell")
    p.add_argument("--base-seed", type=int, default=1)
    p.add_argument("--pop", type=int, default=50)
    p.add_argument("--cycles", type=int, default=150)
    p.add_argument("--pop-sizes", type=_int_list, default=None,
                   help="run the population-size sweep with these sizes instead")
    p.add_argument("--fixed-vm-count", type=int, default=100,
                   help="VM count used by the population-size sweep")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    _add_generator_flags(p)
    p.add_argument("-o", "--output", default="sweep-out", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pareto", help="dump Pareto front snapshots at chosen cycles")
    p.add_argument("instance", help="instance file")
    p.add_argument("--at", type=_int_list, required=True, help="cycles to snapshot, e.g. 100,500")
    _add_solver_flags(p)
    p.add_argument("-o", "--output", default="pareto-out", help="output directory")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("report", help="summarize a records CSV and emit plot data")
    p.add_argument("records", help="records.csv produced by sweep")
    p.add_argument("-o", "--output", default="report-out", help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse argv; values from --config fill in anything not given explicitly."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
    command = payload.pop("command", args.command)
    if command != args.command:
        parser.error(f"--config was written by '{command}', not '{args.command}'")
    # Re-parse with suppressed defaults to know which flags were explicit.
    explicit_parser = build_parser()
    _add_config_flag(explicit_parser)
    for action_group in explicit_parser._subparsers._group_actions:
        for sub in action_group.choices.values():
            for action in sub._actions:
                action.default = argparse.SUPPRESS
    explicit = vars(explicit_parser.parse_args(argv))
    merged = vars(args).copy()
    for key, value in payload.items():
        if key in merged and key not in explicit:
            if isinstance(merged[key], tuple):
                value = tuple(value)
            merged[key] = value
    ns = argparse.Namespace(**merged)
    ns.func = args.func
    return ns


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    for action_group in parser._subparsers._group_actions:
        for sub in action_group.choices.values():
            sub.add_argument("--config", default=None,
                             help="JSON sidecar from a previous run; explicit flags override it")


def main(argv=None) -> int:
    parser = build_parser()
    _add_config_flag(parser)
    args = _apply_config_file(parser, list(sys.argv[1:] if argv is None else argv))
    try:
        return args.func(args)
    except GenerationInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (lamocs.NoFeasibleSolutionError, baselines.NoFeasibleSolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except (InstanceParseError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except lamocs.InstanceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:  # InstanceError and parameter validation
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
