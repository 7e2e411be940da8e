"""Lipschitz constants, observer synthesis and state estimation for a
fourth-order synchronous generator measured by a PMU."""
from importlib import resources

from .model import (
    GeneratorParams, DerivedConstants, StateMatrices, derive_constants,
    build_matrices, eval_f, eval_h, eval_dynamics, eval_output, jac_f_x,
    jac_h_x, steady_state, load_params,
)
from .lipschitz import (
    BoundsBox, LipschitzEstimate, gamma_f_analytic, gamma_h_analytic,
    estimate_gamma_jacobian, estimate_gamma_pairwise, load_bounds,
)
from .qmc import SequenceSpec, generate, star_discrepancy_estimate
from .observer import (
    LMIProblem, FeasibilityCertificate, Infeasible, ObserverGain,
    linearize_output, solve_lmi, extract_gain, necessary_gamma_bound,
)
from .simulation import InputTrajectory, SimConfig, load_inputs, simulate_dse, error_metrics

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a file shipped in ``genlip/data`` (example parameters etc.)."""
    return resources.files(__package__).joinpath("data", name)
