"""Reference solvers for comparison traces: projected gradient descent on
the factorization objective, and an alternating least-squares scheme with
a symmetry penalty.

Both share the splitting solver's initialization protocol and emit the
same trace schema so runs can be compared column for column.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, DivergenceError
from .linalg import SparseSym, fro_norm_sq, single_thread_blas, spd_solve_right, spmm
from .problem import SymProblem, grad_f, objective
from .splitting import IterRecord, IterTrace, initial_factor, xy_residual_fro_sq

__all__ = [
    "BaselineConfig",
    "BaselineResult",
    "pgd_run",
    "pgd_step_once",
    "anls_run",
    "anls_g",
    "anls_x_step",
    "anls_y_step",
    "default_nu",
]

ALGORITHMS = ("pgd", "anls")

# safety cap on projected-gradient sweeps per ANLS half-step
ANLS_GP_MAX_SWEEPS = 1000

DIVERGENCE_FACTOR = 1e12


@dataclass
class BaselineConfig:
    algorithm: str
    max_iters: int = 500
    pgd_step: float = 1e-5
    anls_nu: float | None = None  # None: largest entry of Z
    inner_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.pgd_step <= 0:
            raise ConfigError("pgd_step must be positive")
        if self.anls_nu is not None and self.anls_nu < 0:
            raise ConfigError("anls_nu must be nonnegative")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")


@dataclass
class BaselineResult:
    x: np.ndarray
    trace: IterTrace
    xy_gap: float | None = None


def default_nu(prob: SymProblem) -> float:
    """Scale-aware symmetry penalty: the largest entry of Z."""
    z = prob.Z
    top = float(z.csr.data.max()) if isinstance(z, SparseSym) and z.nnz \
        else float(np.max(np.asarray(z))) if not isinstance(z, SparseSym) \
        else 0.0
    return top if top > 0 else 1.0


def pgd_step_once(x, alpha: float, prob: SymProblem) -> np.ndarray:
    """One projected-gradient step X <- proj_+(X - alpha grad f(X))."""
    return np.maximum(x - alpha * grad_f(x, prob), 0.0)


def _gap_from_grad(x, g) -> float:
    return float(np.max(np.abs(x - np.maximum(x - g, 0.0))))


def pgd_run(prob: SymProblem, cfg: BaselineConfig, x0=None) -> BaselineResult:
    """Fixed-step projected gradient descent on f(X) = (1/2)||XX^T - Z||^2.

    Iterates stay entrywise nonnegative; raises if the objective grows by
    twelve orders of magnitude over its initial value.
    """
    x = np.array(x0, dtype=np.float64) if x0 is not None \
        else initial_factor(prob, cfg.seed)
    trace = IterTrace()
    obj0 = objective(x, prob)
    g = grad_f(x, prob)
    trace.append(IterRecord(
        t=0, elapsed_s=0.0, objective=obj0,
        rel_objective=2.0 * obj0 / prob.z_fro_sq, p_metric=None,
        xy_gap=None, rho=None, beta=None, inner_iters=None,
        stat_gap=_gap_from_grad(x, g),
    ))
    elapsed = 0.0
    limit = DIVERGENCE_FACTOR * max(obj0, 1e-300)
    with single_thread_blas():
        for t in range(1, cfg.max_iters + 1):
            t0 = time.perf_counter()
            x = np.maximum(x - cfg.pgd_step * g, 0.0)
            obj = objective(x, prob)
            if not np.isfinite(obj) or obj > limit:
                raise DivergenceError(
                    f"projected gradient diverged at iteration {t} "
                    f"with step size {cfg.pgd_step}"
                )
            g = grad_f(x, prob)
            elapsed += time.perf_counter() - t0
            trace.append(IterRecord(
                t=t, elapsed_s=elapsed, objective=obj,
                rel_objective=2.0 * obj / prob.z_fro_sq, p_metric=None,
                xy_gap=None, rho=None, beta=None, inner_iters=None,
                stat_gap=_gap_from_grad(x, g),
            ))
    return BaselineResult(x=x, trace=trace)


def anls_g(x, y, prob: SymProblem, nu: float) -> float:
    """Penalized objective ||X Y^T - Z||_F^2 + nu ||X - Y||_F^2."""
    return xy_residual_fro_sq(x, y, prob) + nu * fro_norm_sq(x - y)


def _zy(prob, m):
    return spmm(prob.Z, m) if prob.is_sparse else np.asarray(prob.Z) @ m


def _zty(prob, m):
    return spmm(prob.Z, m) if prob.is_sparse else np.asarray(prob.Z).T @ m


def anls_x_step(x, y, prob: SymProblem, nu: float) -> np.ndarray:
    """Unconstrained ridge minimizer of g over X (closed form)."""
    a = y.T @ y + nu * np.eye(prob.K)
    return spd_solve_right(a, _zy(prob, y) + nu * y)


def anls_y_step(x, y, prob: SymProblem, nu: float, inner_tol: float,
                max_sweeps: int = ANLS_GP_MAX_SWEEPS):
    """Nonnegative least-squares minimizer of g over Y >= 0 by projected
    gradient on the row subproblems; returns (Y, sweeps used)."""
    gram = x.T @ x
    a = gram + nu * np.eye(prob.K)
    b = _zty(prob, x) + nu * x
    lam_max = float(np.linalg.eigvalsh(gram)[-1]) + nu
    return kernels.gp_rows(y, a, b, np.inf, 1.0 / lam_max, max_sweeps,
                           inner_tol)


def anls_run(prob: SymProblem, cfg: BaselineConfig, x0=None) -> BaselineResult:
    """Alternate the closed-form X step with the nonnegative Y step.

    Only Y carries the nonnegativity constraint during iteration; the
    reported solution symmetrizes the factors as proj_+((X + Y)/2) and the
    raw factor gap ||X - Y||_F is kept in the trace.
    """
    nu = cfg.anls_nu if cfg.anls_nu is not None else default_nu(prob)
    y = np.array(x0, dtype=np.float64) if x0 is not None \
        else initial_factor(prob, cfg.seed)
    x = y.copy()

    def candidate():
        return np.maximum(0.5 * (x + y), 0.0)

    trace = IterTrace()
    obj0 = objective(candidate(), prob)
    trace.append(IterRecord(
        t=0, elapsed_s=0.0, objective=obj0,
        rel_objective=2.0 * obj0 / prob.z_fro_sq, p_metric=None,
        xy_gap=0.0, rho=None, beta=None, inner_iters=None,
    ))
    elapsed = 0.0
    with single_thread_blas():
        for t in range(1, cfg.max_iters + 1):
            t0 = time.perf_counter()
            x = anls_x_step(x, y, prob, nu)
            y, sweeps = anls_y_step(x, y, prob, nu, cfg.inner_tol)
            obj = objective(candidate(), prob)
            elapsed += time.perf_counter() - t0
            trace.append(IterRecord(
                t=t, elapsed_s=elapsed, objective=obj,
                rel_objective=2.0 * obj / prob.z_fro_sq, p_metric=None,
                xy_gap=float(np.linalg.norm(x - y)), rho=None, beta=None,
                inner_iters=sweeps,
            ))
    return BaselineResult(x=candidate(), trace=trace,
                          xy_gap=float(np.linalg.norm(x - y)))
