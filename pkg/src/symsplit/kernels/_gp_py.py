"""Pure-numpy implementations of the projection and projected-gradient kernels.

Reference backend: always importable, vectorized across rows. The compiled
extension in ``_gp.pyx`` implements the same contracts with per-row loops.
"""

import numpy as np

BACKEND = "python"


def project_rows(w, tau):
    """Project each row of ``w`` onto {y >= 0, ||y||^2 <= tau}.

    Clip to the nonnegative orthant first, then rescale any row whose norm
    exceeds sqrt(tau) back onto the ball boundary. ``tau = inf`` reduces to
    plain clipping.
    """
    out = np.maximum(w, 0.0)
    if np.isfinite(tau):
        sq = np.einsum("ij,ij->i", out, out)
        over = sq > tau
        if np.any(over):
            out[over] *= np.sqrt(tau / sq[over])[:, None]
    return out


def gp_rows(y0, a, b, tau, alpha, max_iter, tol):
    """Run projected gradient on N independent row subproblems.

    Each row y minimizes (1/2) y A y^T - b_i y^T over the feasible set
    {y >= 0, ||y||^2 <= tau}, iterating y <- proj(y - alpha (y A - b_i)).
    A row stops iterating once its displacement drops to ``tol`` (2-norm);
    returns the updated matrix and the number of sweeps performed (the
    maximum over rows).
    """
    y = np.array(y0, dtype=np.float64, copy=True)
    n = y.shape[0]
    active = np.arange(n)
    tol_sq = tol * tol
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        ya = y[active]
        w = ya - alpha * (ya @ a - b[active])
        np.maximum(w, 0.0, out=w)
        if np.isfinite(tau):
            sq = np.einsum("ij,ij->i", w, w)
            over = sq > tau
            if np.any(over):
                w[over] *= np.sqrt(tau / sq[over])[:, None]
        disp_sq = np.einsum("ij,ij->i", w - ya, w - ya)
        y[active] = w
        active = active[disp_sq > tol_sq]
        if active.size == 0:
            break
    return y, sweeps
