"""Finite-horizon LTI optimal control with for-all-time convex constraints.

Controls are expanded over a finite sinusoidal dictionary; path constraints
are enforced at a finite tuple of sampled times through a strictly convex
QP, and the sample tuple itself is optimized by simulated annealing so that
the sampled value approaches the semi-infinite optimum from below.  A dense
grid verifier, an independent collocation oracle, and a receding-horizon
closed-loop simulator round out the toolkit.
"""

from .basis import BasisSet, custom_basis, fourier_basis
from .benchmarks import bryson_denham, default_sa_config, pendulum
from .dynamics import (LtiSystem, PropagationCache, matrix_exponential,
                       state_at, trajectory_on_grid)
from .errors import (ConstructionError, DomainError, InfeasibleError,
                     NumericalError, OracleError, SipControlError,
                     ValidationError)
from .mpc import ClosedLoopTrace, MpcConfig, simulate_mpc
from .outer import SaConfig, SolveReport, run_sa
from .probfile import (LoadedProblem, load_problem_file, parse_problem,
                       write_problem_file)
from .problem import CostSpec, OcpProblem, Polytope, validate
from .qp import QpSolution, solve_qp
from .transcription import Transcriber, TimeSampleVector
from .verify import ViolationReport, oracle_collocation, verify_dense

__version__ = "1.0.0"

__all__ = [
    "BasisSet", "custom_basis", "fourier_basis",
    "bryson_denham", "default_sa_config", "pendulum",
    "LtiSystem", "PropagationCache", "matrix_exponential",
    "state_at", "trajectory_on_grid",
    "ConstructionError", "DomainError", "InfeasibleError",
    "NumericalError", "OracleError", "SipControlError", "ValidationError",
    "ClosedLoopTrace", "MpcConfig", "simulate_mpc",
    "SaConfig", "SolveReport", "run_sa",
    "LoadedProblem", "load_problem_file", "parse_problem", "write_problem_file",
    "CostSpec", "OcpProblem", "Polytope", "validate",
    "QpSolution", "solve_qp",
    "Transcriber", "TimeSampleVector",
    "ViolationReport", "oracle_collocation", "verify_dense",
    "__version__",
]
