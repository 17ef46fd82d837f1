"""Sparse direct solves and the Newton iteration for the discrete von Karman system."""
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import structural_rank

from .assembly import trilinear_scatter

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class SingularMatrixError(RuntimeError):
    pass


class NewtonConvergenceError(RuntimeError):
    def __init__(self, msg, state, log):
        super().__init__(msg)
        self.state = state
        self.log = log


def _factor(A, opts):
    try:
        return spla.splu(A, **opts)
    except RuntimeError as exc:
        rank = structural_rank(sp.csr_matrix(A))
        raise SingularMatrixError(
            f"factorization failed ({exc}): zero pivot in a {A.shape[0]}x{A.shape[1]} matrix, "
            f"structural rank {rank}, largest entry {abs(A).max():.3e}") from None


def fill_ordering(A):
    """Fill-reducing symmetric ordering of a structurally symmetric matrix.

    Returns `order` such that A[order][:, order] factors with little fill.
    """
    A = sp.csc_matrix(A)
    lu = _factor(A, dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                         options={"SymmetricMode": True}))
    return np.argsort(lu.perm_c)


def block_ordering(order, blocks=2):
    """Expand a per-dof ordering to `blocks` stacked copies, interleaved per dof."""
    n = len(order)
    return (np.asarray(order)[:, None] + n * np.arange(blocks)[None, :]).ravel()


def linear_solve(A, b, symmetric=False, order=None):
    """Solve A x = b by sparse LU; raise SingularMatrixError on (near) singularity.

    `b` may hold several right-hand sides as columns. With `symmetric` the
    factorization uses a symmetric fill ordering and prefers diagonal pivots.
    `order` imposes a precomputed symmetric permutation instead of letting
    the factorization choose one.
    """
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    if A.shape[0] == 0:
        return np.zeros(b.shape)
    opts = {}
    if symmetric:
        opts = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True})
    if order is not None:
        order = np.asarray(order)
        A = A[order][:, order].tocsc()
        b = b[order]
        opts["permc_spec"] = "NATURAL"
    lu = _factor(A, opts)
    piv = np.abs(lu.U.diagonal())
    scale = abs(A).max()
    if piv.min() <= 1e-14 * scale:
        raise SingularMatrixError(
            f"singular matrix: smallest pivot {piv.min():.3e} at position {piv.argmin()}, "
            f"largest entry {scale:.3e}")
    x = lu.solve(b)
    r = A @ x - b
    bound = RESIDUAL_TOL * (spla.norm(A, np.inf) * np.abs(x).max() + np.abs(b).max())
    if not np.all(np.isfinite(x)) or np.abs(r).max() > bound:
        raise SingularMatrixError(
            f"solve residual {np.abs(r).max():.3e} exceeds {bound:.3e}; matrix is numerically "
            f"singular (smallest pivot {piv.min():.3e})")
    if order is not None:
        y, x = x, np.empty_like(x)
        x[order] = y
    return x


def block_stiffness(disc):
    A = disc.stiffness()
    return sp.block_diag([A, A], format="csr")


def energy_norm(disc, X):
    """sqrt(X^T blockdiag(A_h, A_h) X) for a state vector."""
    n = disc.n_dof
    A = disc.stiffness()
    X = np.asarray(X)
    val = X[:n] @ (A @ X[:n]) + X[n:] @ (A @ X[n:])
    return float(np.sqrt(max(val, 0.0)))


def initial_guess(disc, F):
    """Biharmonic solve without the trilinear term."""
    n = disc.n_dof
    F = np.asarray(F, dtype=float)
    x = linear_solve(disc.stiffness(), np.column_stack([F[:n], F[n:]]), symmetric=True)
    return np.concatenate([x[:, 0], x[:, 1]])


def nonlinear_residual(disc, X, F):
    """F_h - A_h X - B_h(X, X, .)."""
    res, _ = trilinear_scatter(disc, X)
    return F - block_stiffness(disc) @ X - res


@dataclass
class NewtonLog:
    update_norms: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    times: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return len(self.update_norms)

    def to_dict(self):
        return {"iterations": self.iterations, "converged": self.converged,
                "update_norms": list(self.update_norms),
                "residual_norms": list(self.residual_norms),
                "times": list(self.times)}


def newton_solve(disc, F, tol=1e-8, max_iter=20, X0=None):
    """Newton iteration; stops when the energy norm of the update is <= tol.

    Each step solves
        [A + J(X_old)] X_new = F + B(X_old, X_old, .)
    with J(X) Y = B(X, Y, .) + B(Y, X, .).
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    F = np.asarray(F, dtype=float)
    AA = block_stiffness(disc)
    # orderings chosen by the factorization on the full 2x2 system are erratic;
    # the ordering of one stiffness block, duplicated, is reliably cheap
    order = block_ordering(fill_ordering(disc.stiffness()))
    X = initial_guess(disc, F) if X0 is None else np.array(X0, dtype=float)
    nlog = NewtonLog()
    for it in range(1, max_iter + 1):
        t0 = time.perf_counter()
        res, J = trilinear_scatter(disc, X)
        X_new = linear_solve(AA + J, F + res, order=order)
        step = energy_norm(disc, X_new - X)
        X = X_new
        rnorm = float(np.linalg.norm(nonlinear_residual(disc, X, F)))
        nlog.update_norms.append(step)
        nlog.residual_norms.append(rnorm)
        nlog.times.append(time.perf_counter() - t0)
        log.info("newton %d: update %.3e residual %.3e", it, step, rnorm)
        if step <= tol:
            nlog.converged = True
            return X, nlog
    raise NewtonConvergenceError(
        f"Newton did not converge in {max_iter} iterations "
        f"(last update {nlog.update_norms[-1]:.3e} > {tol:.1e})", X, nlog)
