import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import vmplace as vp

FIXTURE_PATH = Path(__file__).parent / "data" / "fixture_3x5.inst"


@pytest.fixture(scope="session")
def fixture_problem():
    """The shipped 3-machine, 5-VM instance (generate_instance(3, 5, 42))."""
    return vp.read_instance(FIXTURE_PATH)


@pytest.fixture(scope="session")
def tiny_problem():
    """Handmade 2-machine, 2-VM problem with easy arithmetic."""
    pms = (
        vp.PhysicalMachine(0, cpu_capacity=10.0, mem_capacity=16.0, p_idle=150.0, p_busy=250.0),
        vp.PhysicalMachine(1, cpu_capacity=20.0, mem_capacity=32.0, p_idle=100.0, p_busy=200.0),
    )
    vms = (
        vp.VirtualMachine(0, cpu_demand=5.0, mem_demand=8.0),
        vp.VirtualMachine(1, cpu_demand=4.0, mem_demand=6.0),
    )
    return vp.PlacementProblem(pms, vms)
