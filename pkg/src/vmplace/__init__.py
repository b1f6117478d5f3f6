"""Energy-aware virtual machine placement toolkit.

Core solver: multi-objective cuckoo search steered by per-VM learning
automata, alongside GA/PSO baselines, a brute-force oracle, a seeded
instance generator and an experiment harness.
"""

from .baselines import GaParams, PsoParams, ga_solve, pso_solve
from .instance import (
    FeasibilityReport,
    GenerationInfeasibleError,
    GeneratorConfig,
    InstanceError,
    InstanceParseError,
    PhysicalMachine,
    Placement,
    PlacementProblem,
    VirtualMachine,
    first_fit_decreasing,
    generate_instance,
    instance_hash,
    read_instance,
    validate_placement,
    write_instance,
)
from .lamocs import (
    AutomataEnsemble,
    InstanceTooLargeError,
    LearningAutomaton,
    NoFeasibleSolutionError,
    Solution,
    SolveResult,
    SolverParams,
    brute_force,
    dominates,
    init_ensemble,
    penalize,
    reward,
    sample_placement,
    solve,
)
from .objectives import (
    MetricsRow,
    ObjectiveVector,
    cpu_utilization,
    energy,
    evaluate,
    metrics,
    power,
    total_power,
    utilization,
    waste,
)

__version__ = "0.1.0"
