"""Problem instances: objective, gradient, row-norm bound, data generators.

An instance couples the matrix Z to factorize (dense array or ``SparseSym``),
the target rank K, and the per-row squared-norm cap ``tau`` that makes the
feasible set compact without cutting off any first-order point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .linalg import SparseSym, fro_norm_sq, spmm

__all__ = [
    "SymProblem",
    "GenSpec",
    "theta_k",
    "all_theta",
    "default_tau",
    "objective",
    "rel_objective",
    "grad_f",
    "stationarity_gap_inf",
    "gen_dataset",
]

TAU_SLACK = 1e-6  # default tau = (1 + TAU_SLACK) * max theta, keeping the bound strict


def _check_square(z):
    if isinstance(z, SparseSym):
        return z.n
    z = np.asarray(z)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ShapeError(f"Z must be square, got shape {z.shape}")
    return z.shape[0]


@dataclass
class SymProblem:
    """A factorization instance: Z (N x N), rank K, row bound tau."""

    Z: object
    K: int
    tau: float
    _z_fro_sq: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = _check_square(self.Z)
        if not (1 <= self.K <= n):
            raise ShapeError(f"need 1 <= K <= N, got K={self.K}, N={n}")

    @property
    def n(self) -> int:
        return _check_square(self.Z)

    @property
    def is_sparse(self) -> bool:
        return isinstance(self.Z, SparseSym)

    @property
    def z_fro_sq(self) -> float:
        if self._z_fro_sq is None:
            z = self.Z
            self._z_fro_sq = fro_norm_sq(
                z.csr.data if isinstance(z, SparseSym) else z
            )
        return self._z_fro_sq

    @staticmethod
    def build(z, k: int, tau: float | None = None) -> "SymProblem":
        """Construct an instance, defaulting tau just above max_k theta_k."""
        if tau is None:
            tau = default_tau(z)
        return SymProblem(Z=z, K=int(k), tau=float(tau))


def all_theta(z) -> np.ndarray:
    """Per-index row-bound thresholds.

    theta_k = (Z_kk + (1/2) sqrt(sum_i (Z_ik + Z_ki)^2)) / 2 for every k.
    """
    if isinstance(z, SparseSym):
        diag = z.diagonal()
        s = z.csr.multiply(z.csr).sum(axis=0)
        col_sq = 4.0 * np.asarray(s).ravel()  # Z symmetric: Z_ik + Z_ki = 2 Z_ik
    else:
        z = np.asarray(z, dtype=np.float64)
        _check_square(z)
        diag = np.diagonal(z)
        s = z + z.T
        col_sq = np.einsum("ij,ij->j", s, s)
    return (diag + 0.5 * np.sqrt(col_sq)) / 2.0


def theta_k(z, k: int) -> float:
    n = _check_square(z)
    if not (0 <= k < n):
        raise ShapeError(f"index {k} out of range for N={n}")
    return float(all_theta(z)[k])


def default_tau(z) -> float:
    """Row bound slightly above max_k theta_k so the cap stays inactive."""
    return float(np.max(all_theta(z)) * (1.0 + TAU_SLACK))


def _zx(z, x):
    """Z @ X for dense or sparse Z."""
    return spmm(z, x) if isinstance(z, SparseSym) else np.asarray(z) @ x


def _ztx(z, x):
    """Z^T @ X (equals Z @ X for SparseSym)."""
    return spmm(z, x) if isinstance(z, SparseSym) else np.asarray(z).T @ x


def _objective_dense(x, prob):
    r = x @ x.T - prob.Z
    return 0.5 * fro_norm_sq(r)


def _objective_gram(x, prob):
    # (1/2)(||X^T X||_F^2 - 2 <X, Z X> + ||Z||_F^2), never forms X X^T
    g = x.T @ x
    return 0.5 * (fro_norm_sq(g) - 2.0 * float(np.vdot(x, _zx(prob.Z, x)))
                  + prob.z_fro_sq)


def objective(x, prob: SymProblem) -> float:
    """f(X) = (1/2) ||X X^T - Z||_F^2."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (prob.n, prob.K):
        raise ShapeError(f"X must be {prob.n}x{prob.K}, got {x.shape}")
    if prob.is_sparse:
        return _objective_gram(x, prob)
    return _objective_dense(x, prob)


def rel_objective(x, prob: SymProblem) -> float:
    """||X X^T - Z||_F^2 / ||Z||_F^2, the scale-free comparison metric."""
    denom = prob.z_fro_sq
    if denom == 0.0:
        raise ZeroDivisionError("relative objective undefined for Z = 0")
    return 2.0 * objective(x, prob) / denom


def grad_f(x, prob: SymProblem) -> np.ndarray:
    """Gradient of f: 2 (X X^T - (Z + Z^T)/2) X."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (prob.n, prob.K):
        raise ShapeError(f"X must be {prob.n}x{prob.K}, got {x.shape}")
    sym_zx = (
        spmm(prob.Z, x)
        if prob.is_sparse
        else 0.5 * (_zx(prob.Z, x) + _ztx(prob.Z, x))
    )
    return 2.0 * (x @ (x.T @ x) - sym_zx)


def stationarity_gap_inf(x, prob: SymProblem) -> float:
    """Entrywise-max norm of X - proj_+(X - grad f(X))."""
    x = np.asarray(x, dtype=np.float64)
    gap = x - np.maximum(x - grad_f(x, prob), 0.0)
    return float(np.max(np.abs(gap))) if gap.size else 0.0


@dataclass
class GenSpec:
    """Recipe for a synthetic instance.

    Kinds:
      low_rank  - Z = M M^T with M the entrywise absolute value of an
                  N x K standard-normal draw (exactly factorizable).
      full_rank - Z = (P + P^T)/2 with P uniform on [0, 1].
      adjacency - Gaussian-kernel similarity matrix of 1-D points drawn
                  around per-cluster means.
    """

    kind: str
    n: int
    k: int
    cluster_sizes: Sequence[int] | None = None
    cluster_means: Sequence[float] = (2.0, 3.0, 6.0, 8.0)
    cluster_variance: float = 0.5
    kernel_sigma_sq: float = 0.5
    seed: int = 0

    KINDS = ("low_rank", "full_rank", "adjacency")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"kind must be one of {self.KINDS}, got {self.kind!r}")
        if self.n < 1 or not (1 <= self.k <= self.n):
            raise ValueError(f"need N >= 1 and 1 <= K <= N, got n={self.n}, k={self.k}")
        if self.kind == "adjacency":
            sizes = self.resolved_cluster_sizes()
            if sum(sizes) != self.n:
                raise ValueError(f"cluster sizes {sizes} do not sum to n={self.n}")
            if len(sizes) != len(self.cluster_means):
                raise ValueError("need one mean per cluster")

    def resolved_cluster_sizes(self):
        if self.cluster_sizes is not None:
            return tuple(int(s) for s in self.cluster_sizes)
        # scale the default 3:5:8:4 split to n by largest remainder
        w = np.array([3.0, 5.0, 8.0, 4.0])
        exact = self.n * w / w.sum()
        sizes = np.floor(exact).astype(int)
        rem = exact - sizes
        for i in np.argsort(-rem)[: self.n - sizes.sum()]:
            sizes[i] += 1
        return tuple(int(s) for s in sizes)


def gen_dataset(spec: GenSpec) -> SymProblem:
    """Generate a synthetic instance; identical seeds give bitwise-equal Z.

    Normal variates come from numpy's ziggurat sampler on a PCG64 stream
    seeded with ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "low_rank":
        m = np.abs(rng.standard_normal((spec.n, spec.k)))
        z = m @ m.T
    elif spec.kind == "full_rank":
        p = rng.uniform(size=(spec.n, spec.n))
        z = 0.5 * (p + p.T)
    else:
        sizes = spec.resolved_cluster_sizes()
        sd = np.sqrt(spec.cluster_variance)
        pts = np.concatenate([
            rng.normal(mu, sd, size=sz)
            for mu, sz in zip(spec.cluster_means, sizes)
        ])
        d = pts[:, None] - pts[None, :]
        z = np.exp(-(d * d) / (2.0 * spec.kernel_sigma_sq))
    return SymProblem.build(z, spec.k)
