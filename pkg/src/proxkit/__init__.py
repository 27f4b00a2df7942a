"""Proximal gradient descent for l1-regularized least squares."""

from proxkit.core import (
    DimensionError,
    IterationTrace,
    NonFiniteError,
    ProxkitError,
    SolveResult,
    StopReason,
    matvec,
    matvec_transpose,
    norm2,
)
from proxkit.data import (
    DataError,
    LabeledDataset,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    standardize,
    train_test_split,
)
from proxkit.objective import LassoProblem, PowerIterationError, lipschitz_constant
from proxkit.prox import generalized_gradient, prox_step, soft_threshold
from proxkit.solvers import (
    AdamConfig,
    SolverConfig,
    StepController,
    adam_l1_solve,
    gd_solve,
    prox_gd_constant_solve,
    prox_gd_variable_solve,
)

__version__ = "0.1.0"

__all__ = [
    "AdamConfig",
    "DataError",
    "DimensionError",
    "IterationTrace",
    "LabeledDataset",
    "LassoProblem",
    "NonFiniteError",
    "PowerIterationError",
    "ProxkitError",
    "SolveResult",
    "SolverConfig",
    "SyntheticSpec",
    "StepController",
    "StopReason",
    "adam_l1_solve",
    "gd_solve",
    "generalized_gradient",
    "generate_synthetic",
    "lipschitz_constant",
    "load_csv",
    "matvec",
    "matvec_transpose",
    "norm2",
    "prox_gd_constant_solve",
    "prox_gd_variable_solve",
    "prox_step",
    "soft_threshold",
    "standardize",
    "train_test_split",
]
