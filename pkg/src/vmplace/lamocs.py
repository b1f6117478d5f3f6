"""Multi-objective cuckoo search steered by learning automata.

One learning automaton per VM holds a probability vector over the physical
machines. Each cycle: every nest proposes a Levy-flight candidate which
replaces a randomly chosen nest when it dominates it; the population is
ranked by non-dominated sorting with a crowding tie-break; the worst
``ceil(pa * pop)`` nests are replaced, half by placements sampled from the
automata and half by fresh uniform-random solutions; the automata are then
penalized toward the cycle's worst member and rewarded toward its best
(minimum-energy feasible) member. Feasible evaluated solutions feed a
Pareto archive, and the final answer is the archive member with minimum
energy.

Solutions use a random-key encoding: continuous keys in [0, m) whose floors
are the machine indices, so Levy flights stay continuous while decoded
assignments stay valid.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .instance import Placement, PlacementProblem, first_fit_decreasing
from .objectives import ObjectiveVector, PlacementEvaluator

PROB_TOL = 1e-9
BRUTE_FORCE_LIMIT = 10**6
ARCHIVE_CAPACITY = 1000


class NoFeasibleSolutionError(RuntimeError):
    """The search (or enumeration) found no feasible placement."""


class InstanceTooLargeError(RuntimeError):
    """Exhaustive enumeration would exceed the assignment-count guard."""


@dataclass(frozen=True)
class LearningAutomaton:
    """Probability vector over the m machine actions; always on the simplex."""

    action_probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "action_probs", tuple(float(p) for p in self.action_probs))
        if min(self.action_probs) < -PROB_TOL:
            raise ValueError("action probabilities must be nonnegative")
        if abs(sum(self.action_probs) - 1.0) > PROB_TOL:
            raise ValueError("action probabilities must sum to 1")


@dataclass(frozen=True)
class AutomataEnsemble:
    """One automaton per VM plus the shared reward/penalty factors."""

    automata: tuple[LearningAutomaton, ...]
    reward_factor: float
    penalty_factor: float


@dataclass(frozen=True)
class Solution:
    keys: tuple[float, ...]
    placement: Placement
    objectives: ObjectiveVector
    feasible: bool


@dataclass(frozen=True)
class SolverParams:
    population_size: int = 100
    max_cycles: int = 500
    pa: float = 0.25
    levy_beta: float = 1.5
    penalty_factor: float = 0.5
    reward_factor: float = 0.5
    seed: int = 0
    step_scale: Optional[float] = None  # defaults to 0.1 * m at solve time

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")
        if not (0 < self.pa < 1):
            raise ValueError("pa must be in (0, 1)")
        if not (1 < self.levy_beta <= 2):
            raise ValueError("levy_beta must be in (1, 2]")
        for name in ("penalty_factor", "reward_factor"):
            if not (0 < getattr(self, name) < 1):
                raise ValueError(f"{name} must be in (0, 1)")


@dataclass
class SolveResult:
    pareto_front: list[Solution]
    best: Solution
    history: list[tuple[float, int]]  # per cycle: (archive min energy, front size)
    elapsed: float
    evaluations: int = 0
    snapshots: dict[int, list[tuple[float, float, float]]] = field(default_factory=dict)


def init_ensemble(n: int, m: int, a: float = 0.5, b: float = 0.5) -> AutomataEnsemble:
    """One uniform automaton (every action at 1/m) per VM."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    uniform = LearningAutomaton(tuple([1.0 / m] * m))
    return AutomataEnsemble(automata=tuple([uniform] * n), reward_factor=a, penalty_factor=b)


def penalize(automaton: LearningAutomaton, chosen_action: int, b: float) -> LearningAutomaton:
    """Decrease the chosen action's probability, redistributing to the others.

    p_i' = (1-b) p_i for the chosen action, p_j' = b/(M-1) + (1-b) p_j otherwise.
    """
    p = np.array(automaton.action_probs)
    m = p.size
    if not (0 <= chosen_action < m):
        raise IndexError(f"action {chosen_action} out of range [0, {m})")
    if m == 1:
        return automaton
    out = b / (m - 1) + (1 - b) * p
    out[chosen_action] = (1 - b) * p[chosen_action]
    return LearningAutomaton(tuple(out.tolist()))


def reward(automaton: LearningAutomaton, chosen_action: int, a: float) -> LearningAutomaton:
    """Linear reward: p_i' = p_i + a(1-p_i), all other actions shrink by (1-a)."""
    p = np.array(automaton.action_probs)
    m = p.size
    if not (0 <= chosen_action < m):
        raise IndexError(f"action {chosen_action} out of range [0, {m})")
    out = (1 - a) * p
    out[chosen_action] += a
    return LearningAutomaton(tuple(out.tolist()))


def sample_placement(ensemble: AutomataEnsemble, rng: np.random.Generator) -> Placement:
    """Draw one machine per VM from its automaton's categorical distribution."""
    probs = np.array([aut.action_probs for aut in ensemble.automata])
    return Placement(tuple(_sample_rows(probs, rng)))


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = probs.cumsum(axis=1)
    u = rng.random(probs.shape[0])
    idx = (u[:, None] > cum).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def dominates(a, b) -> bool:
    """Pareto dominance for minimization: a <= b everywhere, < somewhere."""
    ta = a.as_tuple() if isinstance(a, ObjectiveVector) else tuple(a)
    tb = b.as_tuple() if isinstance(b, ObjectiveVector) else tuple(b)
    return all(x <= y for x, y in zip(ta, tb)) and any(x < y for x, y in zip(ta, tb))


def _mantegna_sigma(beta: float) -> float:
    num = math.gamma(1 + beta) * math.sin(math.pi * beta / 2)
    den = math.gamma((1 + beta) / 2) * beta * 2 ** ((beta - 1) / 2)
    return (num / den) ** (1 / beta)


def levy_noise(rng: np.random.Generator, beta: float, size) -> np.ndarray:
    """Mantegna-sampled heavy-tailed steps with stability index beta."""
    u = rng.normal(0.0, _mantegna_sigma(beta), size)
    v = rng.normal(0.0, 1.0, size)
    return u / np.abs(v) ** (1 / beta)


def repair_assignment(
    evaluator: PlacementEvaluator, assignment: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, bool]:
    """Move random VMs off overloaded machines onto the fittest machine.

    The target is the feasible machine with the most CPU headroom. Gives up
    after n moves; the (possibly partially repaired) assignment is returned
    with a success flag.
    """
    a = assignment.copy()
    cpu_load, mem_load = evaluator.machine_loads(a)
    limits = evaluator.cpu_limits
    mem_cap = evaluator.mem_capacities
    cpu_d = evaluator.cpu_demands
    mem_d = evaluator.mem_demands
    tol = 1e-9

    over = set(np.flatnonzero((cpu_load > limits + tol) | (mem_load > mem_cap + tol)).tolist())
    if not over:
        return a, True
    hosted: list[list[int]] = [[] for _ in range(cpu_load.size)]
    for i, j in enumerate(a.tolist()):
        hosted[j].append(i)

    def _update_over(j: int) -> None:
        if cpu_load[j] > limits[j] + tol or mem_load[j] > mem_cap[j] + tol:
            over.add(j)
        else:
            over.discard(j)

    # Machines found temporarily unfixable are deferred; a later move may
    # relieve another machine and reopen headroom for them.
    deferred: set[int] = set()
    moves = 0
    while moves < a.size:
        pending = over - deferred
        if not pending:
            break
        j = min(pending)
        hs = np.array(hosted[j])
        fits = (cpu_load[None, :] + cpu_d[hs][:, None] <= limits[None, :] + tol) & (
            mem_load[None, :] + mem_d[hs][:, None] <= mem_cap[None, :] + tol
        )
        fits[:, j] = False
        movable = np.flatnonzero(fits.any(axis=1))
        if movable.size == 0:
            deferred.add(j)
            continue
        pick = int(movable[rng.integers(movable.size)])
        i = int(hs[pick])
        headroom = np.where(fits[pick], limits - cpu_load, -np.inf)
        target = int(np.argmax(headroom))
        a[i] = target
        hosted[j].remove(i)
        hosted[target].append(i)
        cpu_load[j] -= cpu_d[i]
        mem_load[j] -= mem_d[i]
        cpu_load[target] += cpu_d[i]
        mem_load[target] += mem_d[i]
        _update_over(j)
        _update_over(target)
        deferred.clear()
        moves += 1
    return a, not over



def _process_keys(
    evaluator: PlacementEvaluator, keys: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Decode, repair infeasible rows, evaluate, and penalize repair failures.

    Keys of repaired entries are rewritten so floor(keys) always matches the
    assignment. Returned objective rows of infeasible solutions carry the
    penalty offset on every component.
    """
    m = evaluator.problem.m
    keys = np.array(keys, dtype=float, copy=True)
    assignments = np.clip(np.floor(keys).astype(np.int64), 0, m - 1)
    objs, feasible = evaluator.evaluate_batch(assignments)
    for i in np.flatnonzero(~feasible):
        fixed, ok = repair_assignment(evaluator, assignments[i], rng)
        changed = fixed != assignments[i]
        if changed.any():
            frac = keys[i] - np.floor(keys[i])
            keys[i, changed] = fixed[changed] + frac[changed]
            assignments[i] = fixed
            objs[i], feasible[i] = evaluator.evaluate_one(fixed)
        if not feasible[i]:
            objs[i] = objs[i] + evaluator.penalty_offset
    return keys, assignments, objs, feasible


def _pareto_ranks(objs: np.ndarray) -> np.ndarray:
    """Non-dominated sorting rank per row (0 = first front), vectorized."""
    k = objs.shape[0]
    le = (objs[:, None, :] <= objs[None, :, :]).all(axis=2)
    lt = (objs[:, None, :] < objs[None, :, :]).any(axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    n_dom = dom.sum(axis=0)
    rank = np.full(k, -1, dtype=np.int64)
    r = 0
    while (rank < 0).any():
        front = (n_dom == 0) & (rank < 0)
        if not front.any():  # numerical safety; cannot happen for finite inputs
            front = rank < 0
        rank[front] = r
        n_dom = n_dom - dom[front].sum(axis=0)
        n_dom[front] = np.iinfo(np.int64).max // 2
        r += 1
    return rank


def _crowding_distance(objs: np.ndarray, rank: np.ndarray) -> np.ndarray:
    dist = np.zeros(objs.shape[0])
    for r in np.unique(rank):
        idx = np.flatnonzero(rank == r)
        if idx.size <= 2:
            dist[idx] = np.inf
            continue
        for c in range(objs.shape[1]):
            order = idx[np.argsort(objs[idx, c], kind="stable")]
            span = objs[order[-1], c] - objs[order[0], c]
            dist[order[0]] = dist[order[-1]] = np.inf
            if span > 0:
                dist[order[1:-1]] += (objs[order[2:], c] - objs[order[:-2], c]) / span
    return dist


def _rank_order(objs: np.ndarray) -> np.ndarray:
    """Population indices from best to worst: front, then crowding, then energy."""
    rank = _pareto_ranks(objs)
    crowd = _crowding_distance(objs, rank)
    # lexsort: last key is primary
    return np.lexsort((objs[:, 0], -np.nan_to_num(crowd, posinf=1e18), rank))


class ParetoArchive:
    """Antichain of feasible solutions, pruned by crowding distance at capacity."""

    def __init__(self, capacity: int = ARCHIVE_CAPACITY):
        self.capacity = capacity
        self.objs: list[tuple[float, float, float]] = []
        self.keys: list[tuple[float, ...]] = []
        self.assignments: list[tuple[int, ...]] = []

    def __len__(self) -> int:
        return len(self.objs)

    @property
    def min_energy(self) -> float:
        return min((o[0] for o in self.objs), default=math.inf)

    def add(self, obj: Sequence[float], keys: Sequence[float], assignment: Sequence[int]) -> bool:
        obj = tuple(float(v) for v in obj)
        if self.objs:
            mat = np.array(self.objs)
            c = np.array(obj)
            le = (mat <= c).all(axis=1)
            lt = (mat < c).any(axis=1)
            if (le & lt).any() or (le & ~lt).any():  # dominated or duplicate
                return False
            doomed = ((c <= mat).all(axis=1)) & ((c < mat).any(axis=1))
            if doomed.any():
                keep = np.flatnonzero(~doomed)
                self.objs = [self.objs[i] for i in keep]
                self.keys = [self.keys[i] for i in keep]
                self.assignments = [self.assignments[i] for i in keep]
        self.objs.append(obj)
        self.keys.append(tuple(float(v) for v in keys))
        self.assignments.append(tuple(int(v) for v in assignment))
        if len(self.objs) > self.capacity:
            self._prune()
        return True

    def update(
        self,
        objs: np.ndarray,
        keys: np.ndarray,
        assignments: np.ndarray,
        feasible: np.ndarray,
    ) -> None:
        for i in np.flatnonzero(feasible):
            self.add(objs[i], keys[i], assignments[i])

    def _prune(self) -> None:
        mat = np.array(self.objs)
        crowd = _crowding_distance(mat, np.zeros(len(self.objs), dtype=np.int64))
        keep = np.argsort(-crowd, kind="stable")[: self.capacity]
        keep = np.sort(keep)
        self.objs = [self.objs[i] for i in keep]
        self.keys = [self.keys[i] for i in keep]
        self.assignments = [self.assignments[i] for i in keep]

    def solutions(self) -> list[Solution]:
        return [
            Solution(
                keys=k,
                placement=Placement(a),
                objectives=ObjectiveVector(*o),
                feasible=True,
            )
            for o, k, a in zip(self.objs, self.keys, self.assignments)
        ]


@dataclass
class SolverState:
    """Mutable search state; advance it one generation at a time with step()."""

    problem: PlacementProblem
    params: SolverParams
    evaluator: PlacementEvaluator
    rng: np.random.Generator
    keys: np.ndarray  # (pop, n) float
    assignments: np.ndarray  # (pop, n) int
    objs: np.ndarray  # (pop, 3), penalty already applied to infeasible rows
    feasible: np.ndarray  # (pop,) bool
    automata_probs: np.ndarray  # (n, m)
    archive: ParetoArchive
    cycle: int = 0
    candidates: int = 0
    last_la_replacements: int = 0
    last_random_replacements: int = 0
    last_worst_assignment: Optional[np.ndarray] = None
    last_best_assignment: Optional[np.ndarray] = None

    @property
    def step_scale(self) -> float:
        # Dimensionless: multiplies levy noise times the key distance to the
        # population's best member.
        if self.params.step_scale is not None:
            return self.params.step_scale
        return 0.1


def init_state(problem: PlacementProblem, params: SolverParams) -> SolverState:
    """Uniform-random population with one slot anchored at the FFD packing."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(params.seed)))
    pop, n, m = params.population_size, problem.n, problem.m
    keys = rng.uniform(0.0, m, (pop, n))
    ffd = first_fit_decreasing(problem)
    if ffd is not None:
        keys[0] = np.array(ffd.assignment, dtype=float) + 0.5
    evaluator = PlacementEvaluator(problem)
    keys, assignments, objs, feasible = _process_keys(evaluator, keys, rng)
    archive = ParetoArchive()
    archive.update(objs, keys, assignments, feasible)
    state = SolverState(
        problem=problem,
        params=params,
        evaluator=evaluator,
        rng=rng,
        keys=keys,
        assignments=assignments,
        objs=objs,
        feasible=feasible,
        automata_probs=np.full((n, m), 1.0 / m),
        archive=archive,
        candidates=pop,
    )
    return state


def step(state: SolverState) -> SolverState:
    """Advance one generation; see the module docstring for the cycle layout."""
    params = state.params
    problem = state.problem
    rng = state.rng
    pop = params.population_size
    n, m = problem.n, problem.m

    # Levy phase: each nest proposes a candidate that may oust a random nest.
    # Steps scale with the distance to the population's best member, so moves
    # anneal as nests converge (the standard cuckoo-search formulation).
    noise = levy_noise(rng, params.levy_beta, (pop, n))
    if state.feasible.any():
        energies = np.where(state.feasible, state.objs[:, 0], np.inf)
        guide = state.keys[int(np.argmin(energies))]
    else:
        guide = state.keys[int(np.argmin(state.objs[:, 0]))]
    cand_keys = np.mod(
        state.keys + state.step_scale * noise * (state.keys - guide), m
    )
    ck, ca, co, cf = _process_keys(state.evaluator, cand_keys, rng)
    state.candidates += pop
    targets = rng.integers(pop, size=pop)
    for i in range(pop):
        j = targets[i]
        if dominates(co[i], state.objs[j]):
            state.keys[j] = ck[i]
            state.assignments[j] = ca[i]
            state.objs[j] = co[i]
            state.feasible[j] = cf[i]
    state.archive.update(co, ck, ca, cf)

    # Rank, remember the worst member, then abandon the worst ceil(pa*pop).
    order = _rank_order(state.objs)
    worst_assignment = state.assignments[order[-1]].copy()
    k_worst = math.ceil(params.pa * pop)
    worst = order[::-1][:k_worst]
    n_la = (k_worst + 1) // 2
    la_rows = worst[:n_la]
    rand_rows = worst[n_la:]
    state.last_la_replacements = len(la_rows)
    state.last_random_replacements = len(rand_rows)

    new_keys = np.empty((k_worst, n))
    for pos in range(len(la_rows)):
        new_keys[pos] = _sample_rows(state.automata_probs, rng) + rng.random(n)
    if len(rand_rows):
        new_keys[len(la_rows):] = rng.uniform(0.0, m, (len(rand_rows), n))
    nk, na, no, nf = _process_keys(state.evaluator, new_keys, rng)
    state.candidates += k_worst
    rows = np.concatenate([la_rows, rand_rows])
    state.keys[rows] = nk
    state.assignments[rows] = na
    state.objs[rows] = no
    state.feasible[rows] = nf
    state.archive.update(no, nk, na, nf)

    # Penalize every automaton toward the worst member's action.
    b = params.penalty_factor
    p = state.automata_probs
    if m > 1:
        rows_n = np.arange(n)
        chosen = p[rows_n, worst_assignment]
        p = b / (m - 1) + (1 - b) * p
        p[rows_n, worst_assignment] = (1 - b) * chosen

    # Reward toward the current best (minimum-energy feasible) member.
    best_assignment = None
    if state.feasible.any():
        energies = np.where(state.feasible, state.objs[:, 0], np.inf)
        best_assignment = state.assignments[int(np.argmin(energies))].copy()
        a = params.reward_factor
        p = (1 - a) * p
        p[np.arange(n), best_assignment] += a

    state.automata_probs = p
    state.last_worst_assignment = worst_assignment
    state.last_best_assignment = best_assignment
    state.cycle += 1
    return state


def levy_step(
    problem: PlacementProblem,
    solution: Solution,
    rng: np.random.Generator,
    levy_beta: float = 1.5,
    step_scale: Optional[float] = None,
) -> Solution:
    """One Levy move from a solution: perturb keys, wrap, decode, repair, evaluate."""
    m = problem.m
    scale = 0.1 * m if step_scale is None else step_scale
    keys = np.mod(np.array(solution.keys) + scale * levy_noise(rng, levy_beta, problem.n), m)
    evaluator = PlacementEvaluator(problem)
    k, a, o, f = _process_keys(evaluator, keys.reshape(1, -1), rng)
    return Solution(
        keys=tuple(k[0].tolist()),
        placement=Placement(tuple(a[0].tolist())),
        objectives=ObjectiveVector(*(float(v) for v in o[0])),
        feasible=bool(f[0]),
    )


def solve(
    problem: PlacementProblem,
    params: SolverParams = SolverParams(),
    snapshot_cycles: Optional[Iterable[int]] = None,
) -> SolveResult:
    """Run the full search; deterministic given (problem, params)."""
    t0 = time.perf_counter()
    wanted = set(snapshot_cycles or ())
    state = init_state(problem, params)
    history: list[tuple[float, int]] = []
    snapshots: dict[int, list[tuple[float, float, float]]] = {}
    for cycle in range(1, params.max_cycles + 1):
        step(state)
        history.append((state.archive.min_energy, len(state.archive)))
        if cycle in wanted:
            snapshots[cycle] = list(state.archive.objs)
    if not len(state.archive):
        raise NoFeasibleSolutionError(
            f"no feasible placement found in {params.max_cycles} cycles"
        )
    front = state.archive.solutions()
    best = min(front, key=lambda s: s.objectives.as_tuple())
    return SolveResult(
        pareto_front=front,
        best=best,
        history=history,
        elapsed=time.perf_counter() - t0,
        evaluations=state.candidates,
        snapshots=snapshots,
    )


def brute_force(problem: PlacementProblem) -> Solution:
    """Enumerate every assignment; minimum-energy feasible solution wins.

    Ties break by lower waste, then lower negated utilization, then
    lexicographically smaller assignment. Guarded at 10^6 assignments.
    """
    m, n = problem.m, problem.n
    if m**n > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(f"{m}^{n} assignments exceed the {BRUTE_FORCE_LIMIT} guard")
    evaluator = PlacementEvaluator(problem)
    best_key = None
    best_assignment = None
    chunk: list[tuple[int, ...]] = []

    def consider(batch: list[tuple[int, ...]]):
        nonlocal best_key, best_assignment
        objs, feasible = evaluator.evaluate_batch(np.array(batch, dtype=np.int64))
        for idx in np.flatnonzero(feasible):
            key = (objs[idx, 0], objs[idx, 1], objs[idx, 2], batch[idx])
            if best_key is None or key < best_key:
                best_key = key
                best_assignment = batch[idx]

    for assignment in itertools.product(range(m), repeat=n):
        chunk.append(assignment)
        if len(chunk) >= 8192:
            consider(chunk)
            chunk = []
    if chunk:
        consider(chunk)
    if best_assignment is None:
        raise NoFeasibleSolutionError("no feasible assignment exists for this instance")
    return Solution(
        keys=tuple(float(j) + 0.5 for j in best_assignment),
        placement=Placement(best_assignment),
        objectives=ObjectiveVector(float(best_key[0]), float(best_key[1]), float(best_key[2])),
        feasible=True,
    )
