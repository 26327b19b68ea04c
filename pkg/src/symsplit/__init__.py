"""Symmetric nonnegative matrix factorization via nonconvex splitting.

Factorizes a (usually symmetric, nonnegative) matrix Z as X X^T with
X >= 0 using an augmented-Lagrangian splitting solver, checks global and
local optimality of the result through matrix-free eigenvalue
certificates, and ships projected-gradient and alternating-least-squares
baselines plus synthetic instance generators and an experiment CLI.
"""

from .baselines import BaselineConfig, BaselineResult, anls_run, pgd_run
from .certificates import (
    Certificate,
    ProgressMetrics,
    global_certificate,
    local_certificate,
    local_certificate_k1,
    local_T_op,
    progress_P,
)
from .kernels import BACKEND
from .linalg import LinOp, SparseSym, power_max_eig
from .problem import (
    GenSpec,
    SymProblem,
    default_tau,
    gen_dataset,
    grad_f,
    objective,
    rel_objective,
    stationarity_gap_inf,
    theta_k,
)
from .splitting import IterTrace, RunResult, SolverConfig, SolverState, run

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BaselineConfig",
    "BaselineResult",
    "Certificate",
    "GenSpec",
    "IterTrace",
    "LinOp",
    "ProgressMetrics",
    "RunResult",
    "SolverConfig",
    "SolverState",
    "SparseSym",
    "SymProblem",
    "anls_run",
    "default_tau",
    "gen_dataset",
    "global_certificate",
    "grad_f",
    "local_T_op",
    "local_certificate",
    "local_certificate_k1",
    "objective",
    "pgd_run",
    "power_max_eig",
    "progress_P",
    "rel_objective",
    "run",
    "stationarity_gap_inf",
    "theta_k",
]
