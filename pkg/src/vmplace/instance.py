"""Placement problem model, feasibility checks, seeded instance generation and file I/O.

An instance is a set of physical machines (CPU/memory capacity plus an
idle/busy power profile) and a set of virtual machines (CPU/memory demand).
A placement assigns every VM to exactly one machine; a machine is overloaded
when its hosted CPU demand exceeds ``cpu_threshold * cpu_capacity`` or its
hosted memory demand exceeds ``mem_capacity``.

Instances are serialized to a line-oriented ``key=value`` text format
(``format_version=1``, see :func:`write_instance`) with full-precision
decimal numbers so round-trips are bit exact.

Random generation uses numpy's PCG64 generator seeded from
``SeedSequence([seed, attempt])``, so identical arguments reproduce
identical instances on any platform.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

FORMAT_VERSION = 1

# Absolute slack used in every capacity comparison, so that float summation
# order can never flip a feasibility verdict.
CAPACITY_TOL = 1e-9

_GENERATION_RETRIES = 100
_DEMAND_CAP_FRACTION = 0.999  # per-VM demand stays strictly below the mean capacity
_MEM_LOAD_CAP = 0.7  # aggregate memory demand is scaled down to this capacity fraction


class InstanceError(ValueError):
    """Base class for instance-related failures."""


class GenerationInfeasibleError(InstanceError):
    """No feasible instance was found within the retry budget."""


class DimensionError(InstanceError):
    """A placement does not match the problem dimensions."""


class InstanceParseError(InstanceError):
    """An instance file could not be parsed.

    Carries the 1-based line number and, when known, the offending field.
    """

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.field = field


@dataclass(frozen=True)
class PhysicalMachine:
    id: int
    cpu_capacity: float  # GHz
    mem_capacity: float  # GB
    p_idle: float  # watts
    p_busy: float  # watts

    def __post_init__(self):
        if self.cpu_capacity <= 0 or self.mem_capacity <= 0:
            raise InstanceError(f"machine {self.id}: capacities must be positive")
        if not (0 <= self.p_idle <= self.p_busy):
            raise InstanceError(f"machine {self.id}: need 0 <= p_idle <= p_busy")


@dataclass(frozen=True)
class VirtualMachine:
    id: int
    cpu_demand: float  # GHz
    mem_demand: float  # GB

    def __post_init__(self):
        if self.cpu_demand <= 0 or self.mem_demand <= 0:
            raise InstanceError(f"vm {self.id}: demands must be positive")


@dataclass(frozen=True)
class PlacementProblem:
    """Immutable problem instance.

    ``cpu_threshold`` caps the usable fraction of each machine's CPU;
    ``alpha``/``beta`` weight the CPU and memory terms of the utilization
    objective.
    """

    pms: tuple[PhysicalMachine, ...]
    vms: tuple[VirtualMachine, ...]
    cpu_threshold: float = 0.9
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pms", tuple(self.pms))
        object.__setattr__(self, "vms", tuple(self.vms))
        if len(self.pms) < 1 or len(self.vms) < 1:
            raise InstanceError("need at least one physical and one virtual machine")
        if not (0 < self.cpu_threshold <= 1):
            raise InstanceError("cpu_threshold must be in (0, 1]")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise InstanceError("weights must be nonnegative with alpha + beta > 0")

    @property
    def m(self) -> int:
        return len(self.pms)

    @property
    def n(self) -> int:
        return len(self.vms)

    # Array views used by the evaluators; rebuilt on demand, cached by callers.
    def cpu_capacities(self) -> np.ndarray:
        return np.array([pm.cpu_capacity for pm in self.pms])

    def mem_capacities(self) -> np.ndarray:
        return np.array([pm.mem_capacity for pm in self.pms])

    def idle_powers(self) -> np.ndarray:
        return np.array([pm.p_idle for pm in self.pms])

    def busy_powers(self) -> np.ndarray:
        return np.array([pm.p_busy for pm in self.pms])

    def cpu_demands(self) -> np.ndarray:
        return np.array([vm.cpu_demand for vm in self.vms])

    def mem_demands(self) -> np.ndarray:
        return np.array([vm.mem_demand for vm in self.vms])


@dataclass(frozen=True)
class Placement:
    """Assignment vector: entry i is the machine index hosting VM i."""

    assignment: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))

    def __len__(self) -> int:
        return len(self.assignment)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    overloaded_cpu: tuple[int, ...]
    overloaded_mem: tuple[int, ...]


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the random instance generator.

    ``load_fraction`` is the minimum ratio of total VM CPU demand to total
    machine CPU capacity. Generated problems carry ``cpu_threshold`` from
    this config; it must exceed ``load_fraction``, otherwise packing the
    demanded load would require a zero-slack perfect fit.
    """

    cpu_range: tuple[float, float] = (4.0, 16.0)
    mem_range: tuple[float, float] = (8.0, 32.0)
    load_fraction: float = 0.9
    power_range: tuple[float, float] = (200.0, 300.0)
    idle_ratio: float = 0.6
    cpu_threshold: float = 0.95

    def __post_init__(self):
        for name in ("cpu_range", "mem_range", "power_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise InstanceError(f"{name}: need 0 < lower <= upper")
        if not (0 < self.load_fraction < 1):
            raise InstanceError("load_fraction must be in (0, 1)")
        if not (0 < self.idle_ratio <= 1):
            raise InstanceError("idle_ratio must be in (0, 1]")
        if not (self.load_fraction < self.cpu_threshold <= 1):
            raise InstanceError("cpu_threshold must be in (load_fraction, 1]")


def _check_placement(problem: PlacementProblem, placement: Placement) -> np.ndarray:
    a = np.asarray(placement.assignment, dtype=np.int64)
    if a.shape != (problem.n,):
        raise DimensionError(
            f"placement has {a.size} entries, problem has {problem.n} VMs"
        )
    if a.size and (a.min() < 0 or a.max() >= problem.m):
        raise DimensionError(f"placement entries must lie in [0, {problem.m})")
    return a


def validate_placement(problem: PlacementProblem, placement: Placement) -> FeasibilityReport:
    """Check every machine against its CPU threshold and memory capacity."""
    a = _check_placement(problem, placement)
    cpu_load = np.bincount(a, weights=problem.cpu_demands(), minlength=problem.m)
    mem_load = np.bincount(a, weights=problem.mem_demands(), minlength=problem.m)
    cpu_cap = problem.cpu_threshold * problem.cpu_capacities()
    over_cpu = tuple(np.flatnonzero(cpu_load > cpu_cap + CAPACITY_TOL).tolist())
    over_mem = tuple(np.flatnonzero(mem_load > problem.mem_capacities() + CAPACITY_TOL).tolist())
    return FeasibilityReport(
        feasible=not over_cpu and not over_mem,
        overloaded_cpu=over_cpu,
        overloaded_mem=over_mem,
    )


def first_fit_decreasing(problem: PlacementProblem) -> Optional[Placement]:
    """Pack VMs by decreasing CPU demand, first machine where both resources fit.

    Returns None when FFD fails; FFD success certifies feasibility, failure
    proves nothing.
    """
    cpu = problem.cpu_demands()
    mem = problem.mem_demands()
    cpu_cap = problem.cpu_threshold * problem.cpu_capacities()
    mem_cap = problem.mem_capacities()
    cpu_load = np.zeros(problem.m)
    mem_load = np.zeros(problem.m)
    assignment = np.full(problem.n, -1, dtype=np.int64)
    for i in np.argsort(-cpu, kind="stable"):
        fits = (cpu_load + cpu[i] <= cpu_cap + CAPACITY_TOL) & (
            mem_load + mem[i] <= mem_cap + CAPACITY_TOL
        )
        js = np.flatnonzero(fits)
        if js.size == 0:
            return None
        j = int(js[0])
        assignment[i] = j
        cpu_load[j] += cpu[i]
        mem_load[j] += mem[i]
    return Placement(tuple(assignment.tolist()))


def _scale_to_target(values: np.ndarray, target: float, cap: float) -> Optional[np.ndarray]:
    """Scale values until their sum lands on target, clamping each at cap."""
    v = values.copy()
    if v.sum() > target:
        v *= target / v.sum()
        return v
    for _ in range(64):
        total = v.sum()
        if total >= target:
            return v
        free = v < cap
        if not free.any():
            return None
        fixed = v[~free].sum()
        need = target - fixed
        if need <= 0:
            return None
        v[free] *= need / v[free].sum()
        np.minimum(v, cap, out=v)
    return v if v.sum() >= target else None


def generate_instance(
    n_pms: int,
    n_vms: int,
    seed: int,
    config: GeneratorConfig = GeneratorConfig(),
) -> PlacementProblem:
    """Generate a random instance with a certified-feasible packing.

    Machine CPU/memory capacities and busy power are uniform in the config
    intervals; idle power is ``idle_ratio * p_busy``. VM demands are drawn
    uniformly below the mean machine capability, then CPU demands are scaled
    up so the aggregate demand reaches ``load_fraction`` of total capacity.
    Each attempt is certified with a first-fit-decreasing probe; failed
    attempts are regenerated from a derived sub-seed, up to 100 times.
    """
    if n_pms < 1 or n_vms < 1:
        raise InstanceError("n_pms and n_vms must be at least 1")
    for attempt in range(_GENERATION_RETRIES):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, attempt])))
        pm_cpu = rng.uniform(*config.cpu_range, n_pms)
        pm_mem = rng.uniform(*config.mem_range, n_pms)
        p_busy = rng.uniform(*config.power_range, n_pms)
        p_idle = config.idle_ratio * p_busy

        cpu_cap = _DEMAND_CAP_FRACTION * pm_cpu.mean()
        mem_cap = _DEMAND_CAP_FRACTION * pm_mem.mean()
        # Tiny multiplier keeps the achieved ratio >= load_fraction despite
        # float rounding in the scaler.
        target = config.load_fraction * (1 + 1e-9) * pm_cpu.sum()
        if n_vms * cpu_cap <= target:
            raise GenerationInfeasibleError(
                f"{n_vms} VMs capped below the mean capacity cannot reach "
                f"{config.load_fraction:.0%} of {n_pms} machines' CPU capacity"
            )
        vm_cpu = rng.uniform(1e-3 * cpu_cap, cpu_cap, n_vms)
        vm_cpu = _scale_to_target(vm_cpu, target, cpu_cap)
        if vm_cpu is None:
            continue
        vm_mem = rng.uniform(1e-3 * mem_cap, mem_cap, n_vms)
        mem_budget = _MEM_LOAD_CAP * pm_mem.sum()
        if vm_mem.sum() > mem_budget:
            vm_mem *= mem_budget / vm_mem.sum()

        problem = PlacementProblem(
            pms=tuple(
                PhysicalMachine(j, float(pm_cpu[j]), float(pm_mem[j]), float(p_idle[j]), float(p_busy[j]))
                for j in range(n_pms)
            ),
            vms=tuple(
                VirtualMachine(i, float(vm_cpu[i]), float(vm_mem[i])) for i in range(n_vms)
            ),
            cpu_threshold=config.cpu_threshold,
        )
        if first_fit_decreasing(problem) is not None:
            return problem
    raise GenerationInfeasibleError(
        f"no feasible instance for n_pms={n_pms}, n_vms={n_vms} within "
        f"{_GENERATION_RETRIES} attempts; relax the generator config"
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_instance(problem: PlacementProblem) -> str:
    """Canonical text form of an instance (also the basis of its content hash)."""
    lines = [
        f"format_version={FORMAT_VERSION}",
        f"cpu_threshold={_fmt(problem.cpu_threshold)}",
        f"alpha={_fmt(problem.alpha)}",
        f"beta={_fmt(problem.beta)}",
        f"pm_count={problem.m}",
        f"vm_count={problem.n}",
    ]
    for pm in problem.pms:
        lines.append(
            f"pm id={pm.id} cpu_capacity={_fmt(pm.cpu_capacity)} "
            f"mem_capacity={_fmt(pm.mem_capacity)} p_idle={_fmt(pm.p_idle)} "
            f"p_busy={_fmt(pm.p_busy)}"
        )
    for vm in problem.vms:
        lines.append(
            f"vm id={vm.id} cpu_demand={_fmt(vm.cpu_demand)} mem_demand={_fmt(vm.mem_demand)}"
        )
    return "\n".join(lines) + "\n"


def instance_hash(problem: PlacementProblem) -> str:
    """Lowercase hex sha256 of the canonical serialization."""
    return hashlib.sha256(serialize_instance(problem).encode("utf-8")).hexdigest()


def write_instance(problem: PlacementProblem, path) -> None:
    Path(path).write_text(serialize_instance(problem), encoding="utf-8")


def _parse_kv(tokens: list[str], required: Sequence[str], line_no: int, kind: str) -> dict:
    values = {}
    for tok in tokens:
        if "=" not in tok:
            raise InstanceParseError(f"malformed {kind} token '{tok}'", line=line_no)
        key, _, raw = tok.partition("=")
        values[key] = raw
    out = {}
    for name in required:
        if name not in values:
            raise InstanceParseError(f"{kind} entry missing a field", line=line_no, field=name)
        raw = values[name]
        try:
            out[name] = int(raw) if name == "id" else float(raw)
        except ValueError:
            raise InstanceParseError(
                f"{kind} field has non-numeric value '{raw}'", line=line_no, field=name
            ) from None
    return out


def parse_instance(text: str) -> PlacementProblem:
    header: dict[str, float] = {}
    header_lines: dict[str, int] = {}
    pms: list[PhysicalMachine] = []
    vms: list[VirtualMachine] = []
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "pm":
            vals = _parse_kv(
                tokens[1:], ("id", "cpu_capacity", "mem_capacity", "p_idle", "p_busy"), line_no, "pm"
            )
            try:
                pms.append(
                    PhysicalMachine(
                        int(vals["id"]), vals["cpu_capacity"], vals["mem_capacity"],
                        vals["p_idle"], vals["p_busy"],
                    )
                )
            except InstanceError as exc:
                raise InstanceParseError(str(exc), line=line_no) from None
        elif tokens[0] == "vm":
            vals = _parse_kv(tokens[1:], ("id", "cpu_demand", "mem_demand"), line_no, "vm")
            try:
                vms.append(VirtualMachine(int(vals["id"]), vals["cpu_demand"], vals["mem_demand"]))
            except InstanceError as exc:
                raise InstanceParseError(str(exc), line=line_no) from None
        elif "=" in line and len(tokens) == 1:
            key, _, raw = line.partition("=")
            try:
                header[key] = float(raw)
            except ValueError:
                raise InstanceParseError(
                    f"header field has non-numeric value '{raw}'", line=line_no, field=key
                ) from None
            header_lines[key] = line_no
        else:
            raise InstanceParseError(f"unrecognized line '{line}'", line=line_no)

    for name in ("format_version", "cpu_threshold", "alpha", "beta", "pm_count", "vm_count"):
        if name not in header:
            raise InstanceParseError("missing header field", field=name)
    if int(header["format_version"]) != FORMAT_VERSION:
        raise InstanceParseError(
            f"unsupported format_version {header['format_version']:g}",
            line=header_lines.get("format_version"), field="format_version",
        )
    if len(pms) != int(header["pm_count"]):
        raise InstanceParseError(
            f"pm_count={int(header['pm_count'])} but found {len(pms)} pm lines", field="pm_count"
        )
    if len(vms) != int(header["vm_count"]):
        raise InstanceParseError(
            f"vm_count={int(header['vm_count'])} but found {len(vms)} vm lines", field="vm_count"
        )
    for seq, kind in ((pms, "pm"), (vms, "vm")):
        ids = [entry.id for entry in seq]
        if ids != list(range(len(seq))):
            raise InstanceParseError(f"{kind} ids must be 0..{len(seq) - 1} in order", field="id")
    try:
        return PlacementProblem(
            pms=tuple(pms), vms=tuple(vms),
            cpu_threshold=header["cpu_threshold"],
            alpha=header["alpha"], beta=header["beta"],
        )
    except InstanceError as exc:
        raise InstanceParseError(str(exc)) from None


def read_instance(path) -> PlacementProblem:
    return parse_instance(Path(path).read_text(encoding="utf-8"))
