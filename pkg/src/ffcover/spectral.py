"""Transient linear solves and normalized-Laplacian spectra.

The exit distribution of a walk confined to a visited set ``U`` is
``diag(eta) (I - P_UU^T)^{-1} s0``: ``P_UU`` holds the within-set transition
probabilities, ``eta`` the one-step exit probabilities and ``s0`` indicates
the start node.  When the set is a bottleneck ``eta`` is tiny and
``I - P_UU`` is nearly singular, so the dense path uses a cancellation-free
elimination for M-matrices instead of plain LU: pivots are assembled from
exit probabilities and off-diagonal magnitudes, never by subtracting
numbers close to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as splinalg

from .errors import (
    DegenerateExit,
    EigenNotConverged,
    SolveNotConverged,
    ValidationError,
    ZeroLambda2,
)
from .graph import BottleneckReport, TransitionKernel, WeightedDigraph, escape_time_estimate

DENSE_THRESHOLD = 512
SOLVE_TOL = 1e-12
# clipping window for tiny negative exit probabilities before renormalizing
CLIP_TOL = 1e-12
# largest system the iterative path may hand back to the dense solver
DENSE_FALLBACK_MAX = 8192


@dataclass(frozen=True, eq=False)
class TransientSystem:
    """Walk restricted to a visited set: within-set transitions, exit probabilities, start."""

    p_uu: np.ndarray
    eta: np.ndarray
    s0: np.ndarray

    def __post_init__(self):
        n = len(self.eta)
        if self.p_uu.shape != (n, n) or self.s0.shape != (n,):
            raise ValidationError("p_uu, eta and s0 have inconsistent shapes")
        rows = np.asarray(self.p_uu.sum(axis=1)).ravel()
        if np.any(rows > 1 + 1e-12) or np.any(self.eta < 0):
            raise ValidationError("p_uu must be substochastic and eta nonnegative")
        if np.max(np.abs(self.eta - (1.0 - rows))) > 1e-12:
            raise ValidationError("eta must equal one minus the within-set row sums")
        if np.count_nonzero(self.s0) != 1 or self.s0.max() != 1.0:
            raise ValidationError("s0 must be a unit basis vector")

    @classmethod
    def from_kernel(cls, kernel: TransitionKernel, visited, start: int) -> "TransientSystem":
        """Build the system for sorted ``visited`` nodes with the walk at ``start``.

        Exit probabilities are summed directly over the unvisited columns,
        which keeps them accurate when they are far below machine epsilon
        relative to one.
        """
        u = np.asarray(visited)
        inside = np.zeros(kernel.m, dtype=bool)
        inside[u] = True
        if kernel.is_sparse:
            rows = kernel.p[u]
            p_uu = rows[:, u].toarray()
            eta = np.asarray(rows[:, ~inside].sum(axis=1)).ravel()
        else:
            rows = kernel.p[u]
            p_uu = rows[:, u]
            eta = rows[:, ~inside].sum(axis=1)
        s0 = np.zeros(len(u))
        s0[int(np.searchsorted(u, start))] = 1.0
        return cls(p_uu, eta, s0)


def _mmatrix_solve_t(p_uu: np.ndarray, eta: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(I - P)^T x = rhs`` for substochastic ``P`` with row deficits ``eta``.

    Gaussian elimination without pivoting on ``B = (I - P)^T``.  Off-diagonal
    entries of every Schur complement stay nonpositive and the column sums
    stay nonnegative, so each pivot is recomputed as column sum plus
    off-diagonal magnitudes.  With ``rhs >= 0`` the triangular solves only add
    nonnegative terms.
    """
    b = -np.array(p_uu, dtype=float).T
    n = b.shape[0]
    colsum = np.array(eta, dtype=float)
    for k in range(n):
        below = b[k + 1:, k]
        piv = colsum[k] - below.sum()
        if not piv > 0:
            raise DegenerateExit("walk cannot leave the visited set from every node")
        b[k, k] = piv
        below /= piv
        right = b[k, k + 1:]
        colsum[k + 1:] -= right * colsum[k] / piv
        b[k + 1:, k + 1:] -= np.outer(below, right)
    y = scipy.linalg.solve_triangular(b, rhs, lower=True, unit_diagonal=True, check_finite=False)
    return scipy.linalg.solve_triangular(b, y, lower=False, check_finite=False)


def _backward_error(p_uu, x: np.ndarray, s0: np.ndarray) -> float:
    r = s0 - (x - p_uu.T @ x)
    scale = 2.0 * np.max(np.abs(x)) + np.max(np.abs(s0))
    return float(np.max(np.abs(r)) / scale) if scale > 0 else 0.0


def solve_transient(
    p_uu,
    s0,
    tol: float = SOLVE_TOL,
    *,
    eta=None,
    dense_threshold: int = DENSE_THRESHOLD,
) -> np.ndarray:
    """Solve ``(I - P_UU^T) x = s0``.

    Systems of size at most ``dense_threshold`` use the cancellation-free
    elimination above; larger ones use restarted GMRES and fall back to the
    dense path when GMRES stalls.  Acceptance is on the normwise backward
    error ``|r|_inf / (|A|_inf |x|_inf + |s0|_inf) <= tol``.
    """
    s0 = np.asarray(s0, dtype=float)
    n = s0.shape[0]
    if eta is None:
        rows = np.asarray(p_uu.sum(axis=1)).ravel()
        eta = np.clip(1.0 - rows, 0.0, None)
    eta = np.asarray(eta, dtype=float)
    if n <= dense_threshold:
        pd = p_uu.toarray() if sparse.issparse(p_uu) else p_uu
        x = _mmatrix_solve_t(pd, eta, s0)
    else:
        x = _iterative_solve(p_uu, eta, s0, tol)
    err = _backward_error(p_uu, x, s0)
    if not err <= tol:
        raise SolveNotConverged(err)
    return x


def _iterative_solve(p_uu, eta, s0, tol):
    n = s0.shape[0]
    a = sparse.identity(n, format="csr") - sparse.csr_matrix(p_uu).T
    x, info = splinalg.gmres(a, s0, rtol=tol, atol=0.0, restart=min(n, 100), maxiter=10 * n)
    if info == 0 and _backward_error(p_uu, x, s0) <= tol:
        return x
    if n <= DENSE_FALLBACK_MAX:
        pd = p_uu.toarray() if sparse.issparse(p_uu) else p_uu
        return _mmatrix_solve_t(pd, eta, s0)
    raise SolveNotConverged(_backward_error(p_uu, x, s0))


def exit_node_distribution(
    sys: TransientSystem,
    tol: float = SOLVE_TOL,
    dense_threshold: int = DENSE_THRESHOLD,
) -> np.ndarray:
    """Probability that each visited node is the walk's last position before it exits.

    The right-hand side is scaled by ``max(eta)`` so the solution stays of
    order one even when exit probabilities are astronomically small.
    """
    eta = sys.eta
    scale = float(eta.max())
    if not scale > 0:
        raise DegenerateExit("all exit probabilities are zero")
    x = solve_transient(sys.p_uu, sys.s0 * scale, tol, eta=eta, dense_threshold=dense_threshold)
    v = eta * x / scale
    total = v.sum()
    if abs(total - 1.0) > 1e-9 or np.any(v < -CLIP_TOL):
        raise SolveNotConverged(abs(total - 1.0))
    v = np.clip(v, 0.0, None)
    return v / v.sum()


# spectra -----------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralResult:
    lambda2: float
    eigvec: np.ndarray
    method: str  # "dense_sym" or "lanczos"


def _symmetrized_operator(g: WeightedDigraph, kernel: TransitionKernel | None):
    """``S = (A + A^T) / 2`` with ``A = Phi^1/2 P Phi^-1/2``, so that ``L = I - S``."""
    if kernel is None:
        d = g.out_weights
        p = (sparse.diags(1.0 / d) @ g.weights) if g.is_sparse else g.weights / d[:, None]
        pi = d / d.sum()
    else:
        p, pi = kernel.p, kernel.pi
    phi = np.sqrt(pi)
    if sparse.issparse(p):
        a = sparse.diags(phi) @ p @ sparse.diags(1.0 / phi)
        return ((a + a.T) * 0.5).tocsr()
    a = phi[:, None] * p / phi[None, :]
    return 0.5 * (a + a.T)


def lambda2(
    g: WeightedDigraph,
    kernel: TransitionKernel | None = None,
    dense_threshold: int = DENSE_THRESHOLD,
) -> SpectralResult:
    """Second-smallest eigenvalue of the normalized Laplacian.

    Without a kernel the circulation form ``I - D^-1/2 (W + W^T)/2 D^-1/2`` is
    used, which also works on disconnected graphs.  A structurally
    disconnected symmetrized support returns exactly 0.
    """
    m = g.m
    s = _symmetrized_operator(g, kernel)
    support = sparse.csr_matrix(s) != 0
    ncomp, labels = csgraph.connected_components(support, directed=False)
    if ncomp > 1:
        vec = np.where(labels == labels[0], 1.0, -1.0)
        return SpectralResult(0.0, vec / np.linalg.norm(vec), "structural")
    if m <= dense_threshold:
        dense = s.toarray() if sparse.issparse(s) else s
        vals, vecs = np.linalg.eigh(np.eye(m) - dense)
        lam, vec, method = vals[1], vecs[:, 1], "dense_sym"
    else:
        try:
            vals, vecs = splinalg.eigsh(sparse.csr_matrix(s), k=2, which="LA", tol=1e-12)
        except splinalg.ArpackNoConvergence as exc:
            raise EigenNotConverged(str(exc)) from None
        order = np.argsort(vals)
        lam, vec, method = 1.0 - vals[order[0]], vecs[:, order[0]], "lanczos"
    return SpectralResult(float(np.clip(lam, 0.0, 2.0)), vec, method)


def cover_time_bound(lambda2_value: float, m: int) -> float:
    """Worst-case expected cover time lower bound ``1/sqrt(lambda2) + m - 2``."""
    if not lambda2_value > 0:
        raise ZeroLambda2("lambda2 must be positive")
    return 1.0 / math.sqrt(lambda2_value) + m - 2


def bottleneck_report(g: WeightedDigraph, kernel: TransitionKernel | None = None, visited=None) -> BottleneckReport:
    lam = lambda2(g, kernel).lambda2
    escape = None if visited is None else escape_time_estimate(g, visited)
    bound = cover_time_bound(lam, g.m) if lam > 0 else math.inf
    return BottleneckReport(lam, escape, bound)
