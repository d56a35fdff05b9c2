"""Loping Levenberg-Marquardt-Kaczmarz iteration for systems of ill-posed equations.

Modules
-------
linop
    Matrix-free linear maps and the regularized normal-equation solve.
model
    Operator families ``F_i``, noisy data and tangential-cone estimates.
kaczmarz
    The l-LMK and l-LK iterations, parameter selection and trace checks.
problems
    Test problems with known ground truth and the problem registry.
harness
    Experiment specs, artifact serialization, noise sweeps and the
    verification suite.
"""

from .kaczmarz import (
    InfeasibleParameters,
    InsufficientTrace,
    RunResult,
    SolverConfig,
    StepRecord,
    run_llk,
    run_llmk,
    run_lmk,
    select_parameters,
    verify_monotonicity,
    verify_summability,
)
from .linop import InnerSolvePolicy, LinearMap
from .model import DomainViolation, NoisyData, OperatorFamily, make_noisy_data
from .problems import build_block_linear, build_elliptic_1d, list_problems, make_experiment_instance

__version__ = "0.1.0"

__all__ = [
    "InfeasibleParameters",
    "InsufficientTrace",
    "RunResult",
    "SolverConfig",
    "StepRecord",
    "run_llk",
    "run_llmk",
    "run_lmk",
    "select_parameters",
    "verify_monotonicity",
    "verify_summability",
    "InnerSolvePolicy",
    "LinearMap",
    "DomainViolation",
    "NoisyData",
    "OperatorFamily",
    "make_noisy_data",
    "build_block_linear",
    "build_elliptic_1d",
    "list_problems",
    "make_experiment_instance",
    "__version__",
]
