"""Progress metric and global/local optimality certificates.

The progress metric P stacks the projected-gradient residual of the
augmented Lagrangian with the consensus gap; it is the solver's stopping
quantity and vanishes exactly at first-order points.

The certificates test definiteness of two matrices built from a candidate
point X*: S = X* X*^T - (Z^T + Z)/2 (PSD implies global optimality) and a
KN x KN block matrix T(delta) whose positive definiteness for some
delta > 0 implies a strict local minimum. Both are handled matrix-free;
their smallest eigenvalue is obtained with a shifted power method
(largest eigenvalue of eta I - T for a shift eta above the spectrum).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ShapeError
from .linalg import (LinOp, fro_norm_sq, power_max_eig,
                     single_thread_blas, spmm)
from .problem import SymProblem

__all__ = [
    "ProgressMetrics",
    "Certificate",
    "ScanPoint",
    "progress_P",
    "global_certificate",
    "local_T_op",
    "local_certificate",
    "local_certificate_k1",
]


@dataclass
class ProgressMetrics:
    """Stationarity measure split into its two squared components."""

    prox_grad_norm_sq: float
    xy_gap_sq: float

    @property
    def P(self) -> float:
        return self.prox_grad_norm_sq + self.xy_gap_sq


def _zx(prob, m):
    return spmm(prob.Z, m) if prob.is_sparse else np.asarray(prob.Z) @ m


def _ztx(prob, m):
    return spmm(prob.Z, m) if prob.is_sparse else np.asarray(prob.Z).T @ m


def progress_P(x, y, lam, prob: SymProblem, rho: float) -> ProgressMetrics:
    """Proximal-gradient progress metric of the augmented Lagrangian.

    The Y block is the fixed-point residual Y - proj[Y - grad_Y L] with the
    projection onto {rows >= 0, row norms^2 <= tau}; the X block is grad_X L
    itself (X is unconstrained). P adds the squared consensus gap
    ||X - Y||_F^2 on top of the squared residual norms.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    shape = (prob.n, prob.K)
    if not (x.shape == y.shape == lam.shape == shape):
        raise ShapeError(
            f"X, Y, Lambda must all be {shape}, got {x.shape}, {y.shape}, {lam.shape}"
        )
    if rho <= 0:
        raise ValueError("rho must be positive")
    diff = x - y
    grad_x = x @ (y.T @ y) - _zx(prob, y) + rho * diff + lam
    grad_y = y @ (x.T @ x) - _ztx(prob, x) - rho * diff - lam
    y_block = y - kernels.project_rows(y - grad_y, prob.tau)
    return ProgressMetrics(
        prox_grad_norm_sq=fro_norm_sq(y_block) + fro_norm_sq(grad_x),
        xy_gap_sq=fro_norm_sq(diff),
    )


@dataclass
class ScanPoint:
    delta: float
    lambda_min: float
    residual: float
    converged: bool


@dataclass
class Certificate:
    """Outcome of an optimality check."""

    kind: str  # global | local | local_k1
    verdict: str  # certified | not_certified
    lambda_min: float
    eig_residual: float
    delta: float | None = None
    scanned_deltas: int = 0
    scan: list[ScanPoint] = field(default_factory=list)
    message: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"


def _sym_z_apply(prob):
    """Closure applying (Z^T + Z)/2 to an N x m block."""
    if prob.is_sparse:
        csr = prob.Z.csr
        return lambda v: csr @ v
    z = np.asarray(prob.Z, dtype=np.float64)
    zt = z.T
    return lambda v: 0.5 * (z @ v + zt @ v)


def s_op(x_star, prob: SymProblem) -> LinOp:
    """Operator v -> (X* X*^T - (Z^T + Z)/2) v without forming the matrix."""
    x = np.asarray(x_star, dtype=np.float64).reshape(prob.n, -1)
    symz = _sym_z_apply(prob)
    return LinOp(dim=prob.n, apply=lambda v: x @ (x.T @ v) - symz(v))


def local_T_op(x_star, prob: SymProblem, delta: float) -> LinOp:
    """Matrix-free application of the KN x KN local-optimality block matrix.

    Block (m, n) is (x_m^T x_n - delta ||x_n||^2) I + x_n x_m^T, plus S on
    the diagonal blocks; columns x_m are those of X*. Vectors are stacked
    column-major, so apply cost is O(N K^2 + K nnz(Z)).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    n, k = prob.n, prob.K
    x = np.asarray(x_star, dtype=np.float64).reshape(n, k)
    g = x.T @ x
    d = np.diagonal(g).copy()
    symz = _sym_z_apply(prob)
    ones = np.ones(k)

    def apply(v):
        vm = np.asarray(v).reshape(n, k, order="F")
        m = x.T @ vm
        out = vm @ g - delta * np.outer(vm @ d, ones) + x @ (m.T + m) - symz(vm)
        return out.ravel(order="F")

    return LinOp(dim=n * k, apply=apply)


def _local_T_sym_op(x_star, prob: SymProblem, delta: float) -> LinOp:
    """Symmetric part (T + T^T)/2; only the -delta ||x_n||^2 term differs
    between T and T^T, so symmetrizing costs one extra rank-one update."""
    n, k = prob.n, prob.K
    x = np.asarray(x_star, dtype=np.float64).reshape(n, k)
    g = x.T @ x
    d = np.diagonal(g).copy()
    symz = _sym_z_apply(prob)
    ones = np.ones(k)

    def apply(v):
        vm = np.asarray(v).reshape(n, k, order="F")
        m = x.T @ vm
        skew = np.outer(vm @ d, ones) + np.outer(vm @ ones, d)
        out = vm @ g - 0.5 * delta * skew + x @ (m.T + m) - symz(vm)
        return out.ravel(order="F")

    return LinOp(dim=n * k, apply=apply)


def _t1_op(x_star, prob: SymProblem, delta: float) -> LinOp:
    """Rank-one specialization: (1 - delta)||x||^2 I + 2 x x^T - (Z^T + Z)/2."""
    x = np.asarray(x_star, dtype=np.float64).ravel()
    if x.shape != (prob.n,):
        raise ShapeError(f"x* must have {prob.n} entries, got shape {x.shape}")
    symz = _sym_z_apply(prob)
    c = (1.0 - delta) * float(x @ x)

    def apply(v):
        return c * v + 2.0 * x * (x @ v) - symz(v)

    return LinOp(dim=prob.n, apply=apply)


@dataclass
class _MinEig:
    value: float
    residual: float
    converged: bool
    v_min: np.ndarray
    v_max: np.ndarray | None


_STAGE1_TOL = 1e-3
_STAGE1_ITERS = 5_000
_WARM_NOISE = 1e-3


def _blend(v, rng):
    """Warm start mixed with a little noise.

    A warm vector can be an exact eigenvector of a non-dominant eigenvalue
    of the next operator in a scan (its residual is then zero and the power
    iteration would stop on the wrong eigenpair); the noise guarantees a
    component on the dominant one.
    """
    if v is None:
        return None
    u = rng.standard_normal(v.shape)
    u /= np.linalg.norm(u)
    return v + _WARM_NOISE * u


def _min_eig_shifted(op: LinOp, norm_bound: float, tol_abs: float,
                     max_iter: int, seed: int,
                     warm: _MinEig | None = None) -> _MinEig:
    """Smallest eigenvalue of a symmetric operator via shifted power method.

    A probe run on the operator itself estimates the dominant eigenvalue
    magnitude; the shift is placed just above it (falling back to the
    certified ``norm_bound`` when the probe did not converge), which keeps
    iteration counts proportional to the spectral spread instead of the
    worst-case bound. The main run then finds the largest eigenvalue of
    ``eta I - T``. A negative result there means the shift landed below the
    spectral midpoint; the run is redone with the certified bound.
    """
    rng = np.random.default_rng(seed)
    v_max = _blend(warm.v_max if warm is not None else None, rng)
    v_min = _blend(warm.v_min if warm is not None else None, rng)
    probe = power_max_eig(op, tol=_STAGE1_TOL, max_iter=_STAGE1_ITERS,
                          seed=seed, v0=v_max)
    if probe.converged:
        eta = abs(probe.value) + probe.residual + 0.05 * (abs(probe.value) + 1.0)
    else:
        eta = norm_bound
    # residual <= tol_abs pins the eigenvalue to tol_abs absolute accuracy;
    # the relative stopping rule is rescaled by the largest |value| the
    # shifted operator can reach
    for attempt in range(2):
        shifted = LinOp(dim=op.dim, apply=lambda v, _e=eta: _e * v - op.apply(v))
        tol = tol_abs / max(1.0, 2.2 * eta + 1.0)
        res = power_max_eig(shifted, tol=tol, max_iter=max_iter, seed=seed,
                            v0=v_min)
        if res.value > 0.0 or eta == norm_bound:
            break
        eta = norm_bound
        v_min = _blend(res.vector, rng)
    ok = res.converged or res.residual <= tol_abs
    return _MinEig(eta - res.value, res.residual, ok,
                   res.vector, probe.vector if probe.converged else None)


def _t_norm_bound(x, prob) -> float:
    """Certified upper bound on ||T||_2 from the row cap and ||Z||_F."""
    x_sq = fro_norm_sq(x)
    return 2.0 * (prob.K * max(prob.n * prob.tau, x_sq)
                  + np.sqrt(prob.z_fro_sq)) + 1.0


def global_certificate(x_star, prob: SymProblem, psd_tol: float | None = None,
                       eig_tol: float = 1e-7, max_iter: int = 200_000,
                       seed: int = 0) -> Certificate:
    """Positive-semidefiniteness check of S = X* X*^T - (Z^T + Z)/2.

    Certifies when the smallest eigenvalue is above ``-psd_tol`` (default
    1e-8 (1 + ||Z||_F)); the raw eigenvalue and power-method residual are
    always reported.
    """
    x = np.asarray(x_star, dtype=np.float64).reshape(prob.n, -1)
    if psd_tol is None:
        psd_tol = 1e-8 * (1.0 + np.sqrt(prob.z_fro_sq))
    bound = fro_norm_sq(x) + np.sqrt(prob.z_fro_sq) + 1.0
    with single_thread_blas():
        res = _min_eig_shifted(s_op(x, prob), bound, eig_tol, max_iter, seed)
    if not res.converged:
        return Certificate(kind="global", verdict="not_certified",
                           lambda_min=res.value, eig_residual=res.residual,
                           message="eigensolver did not converge")
    verdict = "certified" if res.value >= -psd_tol else "not_certified"
    return Certificate(kind="global", verdict=verdict, lambda_min=res.value,
                       eig_residual=res.residual)


def _scan_certificate(kind, op_builder, x_star, prob, scan_start, scan_step,
                      psd_margin, eig_tol, max_iter, seed):
    n_steps = int(round((scan_start - 0.01) / scan_step)) + 1
    deltas = [round(scan_start - i * scan_step, 12) for i in range(n_steps)]
    deltas = [d for d in deltas if d > 0]
    bound = _t_norm_bound(np.asarray(x_star, dtype=np.float64), prob)
    scan: list[ScanPoint] = []
    warm = None
    best = None
    skipped = 0
    with single_thread_blas():
        for delta in deltas:
            res = _min_eig_shifted(op_builder(x_star, prob, delta), bound,
                                   eig_tol, max_iter, seed, warm=warm)
            warm = res
            scan.append(ScanPoint(delta, res.value, res.residual, res.converged))
            if not res.converged:
                skipped += 1
                continue
            if best is None or res.value > best[1]:
                best = (delta, res.value, res.residual)
            if res.value > psd_margin:
                return Certificate(kind=kind, verdict="certified",
                                   lambda_min=res.value,
                                   eig_residual=res.residual, delta=delta,
                                   scanned_deltas=len(scan), scan=scan)
    if best is None:
        return Certificate(kind=kind, verdict="not_certified",
                           lambda_min=float("nan"), eig_residual=float("nan"),
                           scanned_deltas=len(scan), scan=scan,
                           message=f"eigensolver failed at all {skipped} scanned deltas")
    return Certificate(kind=kind, verdict="not_certified", lambda_min=best[1],
                       eig_residual=best[2], delta=best[0],
                       scanned_deltas=len(scan), scan=scan)


def local_certificate(x_star, prob: SymProblem, scan_start: float = 1.0,
                      scan_step: float = 0.01, psd_margin: float = 0.0,
                      eig_tol: float = 1e-7, max_iter: int = 200_000,
                      seed: int = 0) -> Certificate:
    """Scan delta downward for a positive definite T(delta).

    Definiteness of the (generally nonsymmetric) block matrix is tested
    through its symmetric part, which is the quadratic form the condition
    bounds. Returns at the first delta whose smallest eigenvalue exceeds
    ``psd_margin``; otherwise reports the best value seen. Every scanned
    delta is recorded for audit.
    """
    x = np.asarray(x_star, dtype=np.float64).reshape(prob.n, prob.K)
    return _scan_certificate("local", _local_T_sym_op, x, prob, scan_start,
                             scan_step, psd_margin, eig_tol, max_iter, seed)


def local_certificate_k1(x_star, prob: SymProblem, scan_start: float = 1.0,
                         scan_step: float = 0.01, psd_margin: float = 0.0,
                         eig_tol: float = 1e-7, max_iter: int = 200_000,
                         seed: int = 0) -> Certificate:
    """Rank-one specialization of the local certificate (K = 1)."""
    if prob.K != 1:
        raise ShapeError(f"rank-one certificate needs K = 1, got K = {prob.K}")
    x = np.asarray(x_star, dtype=np.float64).ravel()
    return _scan_certificate("local_k1", _t1_op, x, prob, scan_start,
                             scan_step, psd_margin, eig_tol, max_iter, seed)
