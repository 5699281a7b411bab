"""Neural approximate dynamic programming for constrained linear control."""

from .control import (
    ExactMpcController,
    HorizonSets,
    LinearSystem,
    QuadraticValue,
    StageCost,
    Trajectory,
    ValueFwController,
    VertexPolicyController,
    admissible_input_set,
    backward_reach_sequence,
    simulate_closed_loop,
)
from .errors import NnadpError
from .estimators import MlpRegressor, VertexPolicyRegressor
from .geometry import (
    HPolytope,
    VPolytope,
    barycentric_coords,
    chebyshev_center,
    contains,
    enumerate_vertices,
    project,
    remove_redundant,
    sample_uniform,
)
from .network import Mlp, forward, init_mlp, input_jacobian, predict
from .pipeline import Dataset, TrainConfig, generate_policy_dataset, sequential_dp_train
from .solvers import FwConfig, frank_wolfe, solve_lp, solve_mpc_qp

__version__ = "0.1.0"

__all__ = [
    "ExactMpcController",
    "HorizonSets",
    "LinearSystem",
    "QuadraticValue",
    "StageCost",
    "Trajectory",
    "ValueFwController",
    "VertexPolicyController",
    "admissible_input_set",
    "backward_reach_sequence",
    "simulate_closed_loop",
    "NnadpError",
    "MlpRegressor",
    "VertexPolicyRegressor",
    "HPolytope",
    "VPolytope",
    "barycentric_coords",
    "chebyshev_center",
    "contains",
    "enumerate_vertices",
    "project",
    "remove_redundant",
    "sample_uniform",
    "Mlp",
    "forward",
    "init_mlp",
    "input_jacobian",
    "predict",
    "Dataset",
    "TrainConfig",
    "generate_policy_dataset",
    "sequential_dp_train",
    "FwConfig",
    "frank_wolfe",
    "solve_lp",
    "solve_mpc_qp",
]
