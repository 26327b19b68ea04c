"""Alternating splitting solver for symmetric nonnegative factorization.

The factorization min (1/2)||X Y^T - Z||_F^2 over {Y >= 0, row norms
bounded, X = Y} is attacked by alternating a constrained least-squares
update of Y (row-separable, solved by projected gradient), a closed-form
ridge update of X, a dual ascent step on the consensus constraint, and a
proximal weight beta proportional to the current residual. With the
penalty rho large enough the augmented Lagrangian descends monotonically
and every limit point is first-order optimal; the progress metric P
drives the stopping test.

Sign convention: the dual matrix Lambda is stored so that after every full
iteration Lambda = -(X Y^T - Z) Y holds, i.e. the consensus term in the
Lagrangian is <X - Y, Lambda> and the ascent step is
Lambda += rho (X - Y).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .certificates import progress_P
from .errors import ConfigError, DegenerateProblemError, NumericalError
from .linalg import fro_norm_sq, single_thread_blas, spd_solve_right, spmm
from .problem import SymProblem, all_theta, objective, rel_objective

__all__ = [
    "SolverConfig",
    "SolverState",
    "IterRecord",
    "IterTrace",
    "RunResult",
    "project_row",
    "initial_factor",
    "init",
    "update_y",
    "update_x",
    "update_dual",
    "update_schedules",
    "step",
    "run",
    "augmented_lagrangian",
    "xy_residual_fro_sq",
]

RHO_INIT_MODES = ("tau_bar", "sqrt_n_tau_bar")


@dataclass
class SolverConfig:
    """Tunables for the splitting solver.

    ``use_schedules=True`` runs the practical parameter schedules (rho and
    the proximal damping factor xi grow geometrically toward their caps,
    beta refreshed every ``beta_update_period`` iterations). With
    ``use_schedules=False`` rho is pinned at ``rho_cap_factor * N * tau``
    and beta is recomputed every iteration from the residual, the exact
    regime of the descent/lower-bound guarantees.
    """

    max_outer_iters: int = 2000
    stop_eps: float = 1e-8
    gp_max_iters: int = 40
    gp_tol: float = 1e-8
    rho_init_mode: str = "sqrt_n_tau_bar"
    rho_cap_factor: float = 6.1
    schedule_eps: float = 1e-3
    xi_init: float = 0.01
    beta_update_period: int = 100
    seed: int = 0
    use_schedules: bool = True

    def __post_init__(self):
        if self.gp_max_iters < 1:
            raise ConfigError("gp_max_iters must be >= 1")
        if self.stop_eps <= 0:
            raise ConfigError("stop_eps must be positive")
        if self.rho_cap_factor <= 6.0:
            raise ConfigError("rho_cap_factor must exceed 6")
        if self.rho_init_mode not in RHO_INIT_MODES:
            raise ConfigError(f"rho_init_mode must be one of {RHO_INIT_MODES}")
        if self.max_outer_iters < 0:
            raise ConfigError("max_outer_iters must be >= 0")
        if self.beta_update_period < 1:
            raise ConfigError("beta_update_period must be >= 1")
        if self.use_schedules and self.xi_init <= self.schedule_eps:
            raise ConfigError("xi_init must exceed schedule_eps")


@dataclass
class SolverState:
    X: np.ndarray
    Y: np.ndarray
    Lam: np.ndarray
    rho: float
    beta: float
    xi: float
    t: int = 0


@dataclass
class IterRecord:
    t: int
    elapsed_s: float
    objective: float
    rel_objective: float
    p_metric: float | None
    xy_gap: float | None
    rho: float | None
    beta: float | None
    inner_iters: int | None
    stat_gap: float | None = None


class IterTrace:
    """Per-iteration metric records shared by all solvers."""

    COLUMNS = ("iter", "elapsed_s", "objective", "rel_objective", "p_metric",
               "xy_gap", "rho", "beta", "inner_iters")

    def __init__(self):
        self.records: list[IterRecord] = []

    def append(self, rec: IterRecord):
        if self.records and rec.t <= self.records[-1].t:
            raise ValueError("iteration counter must be strictly increasing")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    def rows(self):
        for r in self.records:
            yield (r.t, r.elapsed_s, r.objective, r.rel_objective, r.p_metric,
                   r.xy_gap, r.rho, r.beta, r.inner_iters)


@dataclass
class RunResult:
    x: np.ndarray
    y: np.ndarray
    trace: IterTrace
    stop_reason: str  # converged | budget_exhausted
    state: "SolverState | None" = None

    @property
    def final_p(self):
        return self.trace[-1].p_metric

    @property
    def xy_gap(self):
        return self.trace[-1].xy_gap


def project_row(w, tau: float) -> np.ndarray:
    """Euclidean projection of one vector onto {y >= 0, ||y||^2 <= tau}."""
    w = np.asarray(w, dtype=np.float64).ravel()
    return kernels.project_rows(w[None, :], tau)[0]


def _zx(prob, m):
    return spmm(prob.Z, m) if prob.is_sparse else np.asarray(prob.Z) @ m


def _ztx(prob, m):
    return spmm(prob.Z, m) if prob.is_sparse else np.asarray(prob.Z).T @ m


def xy_residual_fro_sq(x, y, prob: SymProblem) -> float:
    """||X Y^T - Z||_F^2 without forming X Y^T when Z is sparse."""
    if prob.is_sparse:
        g = float(np.vdot(x.T @ x, y.T @ y))
        return g - 2.0 * float(np.vdot(x, _zx(prob, y))) + prob.z_fro_sq
    return fro_norm_sq(x @ y.T - prob.Z)


def augmented_lagrangian(x, y, lam, prob: SymProblem, rho: float) -> float:
    """(1/2)||X Y^T - Z||_F^2 + <X - Y, Lambda> + (rho/2)||X - Y||_F^2."""
    diff = x - y
    return (0.5 * xy_residual_fro_sq(x, y, prob)
            + float(np.vdot(diff, lam)) + 0.5 * rho * fro_norm_sq(diff))


def initial_factor(prob: SymProblem, seed: int) -> np.ndarray:
    """Shared starting point: uniform [0, tau] entries, rows projected
    onto the feasible set. Every solver in an experiment starts here."""
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.0, prob.tau, size=(prob.n, prob.K))
    return kernels.project_rows(x0, prob.tau)


def _beta_from_residual(resid_sq, rho, xi):
    return 6.0 * xi * resid_sq / rho


def init(prob: SymProblem, cfg: SolverConfig, x0=None) -> SolverState:
    """Build the initial state; rejects degenerate (all-zero) instances."""
    if prob.tau <= 0:
        raise DegenerateProblemError("tau <= 0: Z has no usable scale")
    if x0 is not None:
        y = np.array(x0, dtype=np.float64)
        rows = np.einsum("ij,ij->i", y, y)
        if (y < 0).any() or rows.max() > prob.tau * (1 + 1e-12):
            y = kernels.project_rows(y, prob.tau)
    else:
        y = initial_factor(prob, cfg.seed)
    x = y.copy()
    lam = np.zeros_like(y)
    if cfg.use_schedules:
        tau_bar = float(np.mean(all_theta(prob.Z)))
        rho = tau_bar if cfg.rho_init_mode == "tau_bar" \
            else np.sqrt(prob.n) * tau_bar
        xi = cfg.xi_init
    else:
        rho = cfg.rho_cap_factor * prob.n * prob.tau
        xi = 1.0
    if rho <= 0:
        raise DegenerateProblemError(f"initial rho = {rho} is not positive")
    beta = _beta_from_residual(xy_residual_fro_sq(x, y, prob), rho, xi)
    return SolverState(X=x, Y=y, Lam=lam, rho=rho, beta=beta, xi=xi)


def update_y(state: SolverState, prob: SymProblem, cfg: SolverConfig) -> int:
    """Approximately minimize the Lagrangian in Y by row-wise projected
    gradient from the previous Y; returns the number of sweeps used."""
    x, lam = state.X, state.Lam
    rho, beta = state.rho, state.beta
    gram = x.T @ x
    a = gram + (rho + beta) * np.eye(prob.K)
    b = _ztx(prob, x) + rho * x + lam + beta * state.Y
    lam_max = float(np.linalg.eigvalsh(gram)[-1]) + rho + beta
    alpha = 1.0 / lam_max
    y_new, sweeps = kernels.gp_rows(state.Y, a, b, prob.tau, alpha,
                                    cfg.gp_max_iters,
                                    cfg.gp_tol * np.sqrt(prob.tau))
    if not np.all(np.isfinite(y_new)):
        raise NumericalError(f"non-finite Y at iteration {state.t + 1}")
    state.Y = y_new
    return sweeps


def update_x(state: SolverState, prob: SymProblem):
    """Closed-form ridge update: X solves X (Y^T Y + rho I) = Z Y + rho Y - Lambda."""
    y = state.Y
    a = y.T @ y + state.rho * np.eye(prob.K)
    zx = _zx(prob, y) + state.rho * y - state.Lam
    x_new = spd_solve_right(a, zx)
    if not np.all(np.isfinite(x_new)):
        raise NumericalError(f"non-finite X at iteration {state.t + 1}")
    state.X = x_new


def update_dual(state: SolverState):
    """Ascent step on the consensus constraint."""
    state.Lam += state.rho * (state.X - state.Y)


def update_schedules(state: SolverState, prob: SymProblem, cfg: SolverConfig):
    """Advance rho/xi and refresh beta for the next iteration."""
    eps = cfg.schedule_eps
    if cfg.use_schedules:
        if state.rho <= eps:
            raise ConfigError(
                f"rho schedule denominator not positive (rho={state.rho}, eps={eps})"
            )
        cap = cfg.rho_cap_factor * prob.n * prob.tau
        state.rho = min(state.rho / (1.0 - eps / state.rho), cap)
        if state.xi <= eps:
            raise ConfigError(
                f"xi schedule denominator not positive (xi={state.xi}, eps={eps})"
            )
        state.xi = min(state.xi / (1.0 - eps / state.xi), 1.0)
        if state.t % cfg.beta_update_period == 0:
            state.beta = _beta_from_residual(
                xy_residual_fro_sq(state.X, state.Y, prob), state.rho, state.xi
            )
    else:
        state.beta = _beta_from_residual(
            xy_residual_fro_sq(state.X, state.Y, prob), state.rho, 1.0
        )


def step(state: SolverState, prob: SymProblem, cfg: SolverConfig,
         elapsed_before: float = 0.0) -> IterRecord:
    """One full iteration: Y, X, dual, schedules, then metrics."""
    t0 = time.perf_counter()
    sweeps = update_y(state, prob, cfg)
    update_x(state, prob)
    update_dual(state)
    state.t += 1
    update_schedules(state, prob, cfg)
    metrics = progress_P(state.X, state.Y, state.Lam, prob, state.rho)
    obj = objective(state.X, prob)
    elapsed = elapsed_before + (time.perf_counter() - t0)
    return IterRecord(
        t=state.t,
        elapsed_s=elapsed,
        objective=obj,
        rel_objective=2.0 * obj / prob.z_fro_sq,
        p_metric=metrics.P,
        xy_gap=float(np.sqrt(metrics.xy_gap_sq)),
        rho=state.rho,
        beta=state.beta,
        inner_iters=sweeps,
    )


def _initial_record(state: SolverState, prob: SymProblem) -> IterRecord:
    metrics = progress_P(state.X, state.Y, state.Lam, prob, state.rho)
    obj = objective(state.X, prob)
    return IterRecord(
        t=0, elapsed_s=0.0, objective=obj,
        rel_objective=2.0 * obj / prob.z_fro_sq,
        p_metric=metrics.P, xy_gap=float(np.sqrt(metrics.xy_gap_sq)),
        rho=state.rho, beta=state.beta, inner_iters=0,
    )


def run(prob: SymProblem, cfg: SolverConfig, x0=None) -> RunResult:
    """Iterate until the progress metric P drops below ``cfg.stop_eps`` or
    the outer-iteration budget is exhausted.

    Returns the factor X as the solution (trace rows carry the consensus
    gap ||X - Y||_F alongside), the companion Y, the full iteration trace
    (row 0 is the initial state), and the stop reason.
    """
    with single_thread_blas():
        state = init(prob, cfg, x0=x0)
        trace = IterTrace()
        trace.append(_initial_record(state, prob))
        stop_reason = "budget_exhausted"
        elapsed = 0.0
        for _ in range(cfg.max_outer_iters):
            rec = step(state, prob, cfg, elapsed_before=elapsed)
            elapsed = rec.elapsed_s
            trace.append(rec)
            if rec.p_metric <= cfg.stop_eps:
                stop_reason = "converged"
                break
    return RunResult(x=state.X, y=state.Y, trace=trace,
                     stop_reason=stop_reason, state=state)
