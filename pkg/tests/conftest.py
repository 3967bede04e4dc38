import numpy as np
import pytest

from tsopt.problems import experiment_mesh, interpolate_target, setup_problem


@pytest.fixture(scope="session")
def mesh8():
    return experiment_mesh(8)


@pytest.fixture(scope="session")
def phi_d8(mesh8):
    return interpolate_target(mesh8)


@pytest.fixture(scope="session")
def params_zero8(mesh8):
    """Benchmark parameters with a zero tracking target (nondegenerate
    sensitivities at the target design)."""
    return setup_problem(mesh8, uhat="zero")


@pytest.fixture(scope="session")
def params_target8(mesh8):
    """Benchmark parameters tracking the attainable state at the target
    design (the optimum then has zero cost)."""
    return setup_problem(mesh8, uhat="target")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
