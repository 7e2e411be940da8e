import json

import numpy as np
import pytest

import genlip
from genlip.model import build_matrices, derive_constants, load_params, steady_state
from genlip.lipschitz import load_bounds
from genlip.observer import LMIProblem, extract_gain, linearize_output, solve_lmi
from genlip.simulation import load_inputs

PERTURBATION = np.array([0.1, 0.5, 0.05, -0.05])
DEMO_GAMMA = 0.9  # inside the feasible range of the example model


@pytest.fixture(scope="session")
def params():
    return load_params(genlip.data_path("example_params.json"))


@pytest.fixture(scope="session")
def consts(params):
    return derive_constants(params)


@pytest.fixture(scope="session")
def mats(consts):
    return build_matrices(consts)


@pytest.fixture(scope="session")
def bounds():
    return load_bounds(genlip.data_path("example_bounds.json"))


@pytest.fixture(scope="session")
def traj():
    return load_inputs(genlip.data_path("example_inputs.csv"))


@pytest.fixture(scope="session")
def x_eq(consts, mats, traj):
    return steady_state(consts, mats, traj.values[0], (0.5, 0.0, 1.0, 0.0))


@pytest.fixture(scope="session")
def output_matrix(consts, x_eq, traj):
    C, _ = linearize_output(consts, x_eq, traj.values[0])
    return C


@pytest.fixture(scope="session")
def demo_gain(mats, output_matrix):
    cert = solve_lmi(LMIProblem(mats.A, output_matrix, DEMO_GAMMA))
    return extract_gain(cert).L


def rand_points(rng, n, scale=(1.0, 400.0, 1.5, 1.5), uscale=(1.0, 2.0, 5.0, 5.0)):
    x = rng.uniform(-1, 1, size=(n, 4)) * np.array(scale)
    u = rng.uniform(-1, 1, size=(n, 4)) * np.array(uscale)
    return x, u


# acceptance criteria record (number -> line); printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
