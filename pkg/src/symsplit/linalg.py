"""Dense/sparse matrix kernels and a power-method extremal eigenvalue routine.

Dense matrices are plain C-contiguous float64 ``numpy`` arrays; the heavy
lifting (products, Cholesky) is delegated to BLAS/LAPACK through numpy and
scipy. Symmetric sparse matrices get a dedicated container that stores the
upper triangle once and keeps a CSR view of the full matrix for products.
"""

from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import NumericalError, ShapeError, SingularMatrixError

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

__all__ = [
    "SparseSym",
    "LinOp",
    "PowerResult",
    "matmul",
    "spmm",
    "fro_norm_sq",
    "spd_solve_right",
    "power_max_eig",
    "single_thread_blas",
]


def single_thread_blas():
    """Context manager pinning BLAS to one thread.

    The iterative solvers issue thousands of small BLAS calls per second;
    a multi-threaded pool adds dispatch latency that dwarfs the arithmetic
    at these sizes, and a single thread fixes the reduction order so runs
    are bitwise reproducible.
    """
    if threadpool_limits is None:
        return nullcontext()
    return threadpool_limits(limits=1)


def as_dense(a) -> np.ndarray:
    """Coerce to a C-contiguous float64 array of rank 2."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of rank {a.ndim}")
    return a


class SparseSym:
    """Symmetric N x N sparse matrix stored as upper-triangle coordinates.

    Entries are given once per symmetric pair (i <= j after normalization);
    duplicates are summed. A CSR matrix of the full symmetric matrix is built
    on construction and used for all products, so the coordinate list is
    read-only bookkeeping after ingestion.
    """

    def __init__(self, n, rows, cols, vals):
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ShapeError("rows/cols/vals must have identical length")
        if rows.size and (rows.min() < 0 or cols.min() < 0
                          or rows.max() >= n or cols.max() >= n):
            raise ShapeError(f"coordinate index out of range for n={n}")
        if not np.all(np.isfinite(vals)):
            raise NumericalError("sparse entries must be finite")
        # normalize to upper triangle
        swap = rows > cols
        rows, cols = np.where(swap, cols, rows), np.where(swap, rows, cols)
        self.n = int(n)
        self.rows = rows
        self.cols = cols
        self.vals = vals
        full_r = np.concatenate([rows, cols[rows != cols]])
        full_c = np.concatenate([cols, rows[rows != cols]])
        full_v = np.concatenate([vals, vals[rows != cols]])
        self._csr = scipy.sparse.csr_matrix(
            (full_v, (full_r, full_c)), shape=(n, n)
        )
        self._csr.sum_duplicates()

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def csr(self):
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def matvec(self, v):
        return self._csr @ v


@dataclass
class LinOp:
    """Matrix-free symmetric-by-contract linear operator on R^dim."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, v):
        return self.apply(v)

    @staticmethod
    def from_dense(m) -> "LinOp":
        m = as_dense(m)
        if m.shape[0] != m.shape[1]:
            raise ShapeError("LinOp.from_dense needs a square matrix")
        return LinOp(dim=m.shape[0], apply=lambda v: m @ v)


def matmul(a, b) -> np.ndarray:
    """Dense matrix product with an explicit inner-dimension check."""
    a, b = as_dense(a), as_dense(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions {a.shape} x {b.shape}")
    return a @ b


def spmm(z: SparseSym, b) -> np.ndarray:
    """Product of a symmetric sparse matrix with a dense matrix."""
    b = as_dense(b)
    if z.n != b.shape[0]:
        raise ShapeError(f"spmm: {z.shape} x {b.shape}")
    return np.asarray(z.csr @ b)


def fro_norm_sq(a) -> float:
    """Squared Frobenius norm (sum of squared entries)."""
    a = np.asarray(a, dtype=np.float64)
    return float(np.dot(a.ravel(), a.ravel()))


def spd_solve_right(a, b) -> np.ndarray:
    """Solve R A = B for R where A is small symmetric positive definite.

    Uses a Cholesky factorization of A; A is typically K x K while B is
    N x K, so the cost is one small factorization plus triangular solves.
    """
    a, b = as_dense(a), as_dense(b)
    if a.shape[0] != a.shape[1]:
        raise ShapeError("spd_solve_right: A must be square")
    if b.shape[1] != a.shape[0]:
        raise ShapeError(f"spd_solve_right: {b.shape} x inv{a.shape}")
    try:
        c, low = scipy.linalg.cho_factor(a, lower=False, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"Cholesky failed on {a.shape[0]}x{a.shape[0]} system: {exc}"
        ) from exc
    # A symmetric: R = B A^{-1}  <=>  A R^T = B^T; contiguous buffers keep
    # scipy off its slow strided path and downstream BLAS calls fast
    rt = scipy.linalg.cho_solve((c, low), np.ascontiguousarray(b.T),
                                check_finite=False)
    return np.ascontiguousarray(rt.T)


@dataclass
class PowerResult:
    value: float
    vector: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    converged: bool


def power_max_eig(op: LinOp, tol: float = 1e-10, max_iter: int = 100_000,
                  seed: int = 0, v0=None) -> PowerResult:
    """Dominant eigenvalue of a symmetric operator by power iteration.

    Starts from a uniform random vector drawn from ``seed`` (or from ``v0``
    when supplied, e.g. to warm-start a scan), normalizes every step, and
    stops once the Rayleigh residual ||op(v) - lambda v|| falls below
    ``tol * max(1, |lambda|)``. The returned flag reports whether that
    happened within ``max_iter`` applications.
    """
    rng = np.random.default_rng(seed)
    if v0 is not None:
        v = np.asarray(v0, dtype=np.float64).copy()
        if v.shape != (op.dim,):
            raise ShapeError(f"v0 must have shape ({op.dim},)")
    else:
        v = rng.uniform(size=op.dim)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        v = rng.uniform(size=op.dim)
        nrm = np.linalg.norm(v)
    v /= nrm

    lam = 0.0
    residual = np.inf
    its = 0
    for its in range(1, max_iter + 1):
        w = op.apply(v)
        if not np.all(np.isfinite(w)):
            raise NumericalError("power iteration produced non-finite values")
        lam = float(v @ w)
        r = w - lam * v
        residual = float(np.linalg.norm(r))
        if residual <= tol * max(1.0, abs(lam)):
            return PowerResult(lam, v, residual, its, True)
        wn = np.linalg.norm(w)
        if wn <= 1e-300:
            # v landed in the kernel; restart from a fresh random direction
            v = rng.uniform(size=op.dim)
            v /= np.linalg.norm(v)
            continue
        v = w / wn
    return PowerResult(lam, v, residual, its, False)
