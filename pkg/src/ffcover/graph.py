"""Weighted directed graphs, random-walk kernels and root distributions.

A graph is a nonnegative weight matrix ``W`` whose entry ``(j, l)`` is the
weight of the edge ``j -> l``.  The walk moves from ``j`` to ``l`` with
probability ``w[j, l] / d[j]``.  Two kernels are supported:

* circulation kernels (row sums equal column sums, which includes symmetric
  graphs), where the walk runs directly on ``W`` and the stationary vector is
  proportional to the out-weights;
* general forward kernels for arbitrary irreducible ``Q``, built from the
  stationary vector of the reversed chain so that a cover walk produces trees
  with probability proportional to the product of ``Q`` edge weights.

Matrices with at most :data:`DENSE_MAX_NODES` nodes are stored densely and as
CSR above that.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import (
    AllZeroScores,
    NegativeWeight,
    NotCirculation,
    NotStronglyConnected,
    StationaryNotConverged,
    ValidationError,
    ZeroOutDegree,
)

DENSE_MAX_NODES = 4096
CIRCULATION_RTOL = 1e-9
STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 10**6
STATIONARY_DENSE_MAX = 64
# entries of the stationary vector below this are treated as a failure
STATIONARY_FLOOR = 1e-300
# per-row python lists are used for walk tables up to this many stored entries
_LIST_TABLE_MAX_NNZ = 2_000_000


def _row_sums(a) -> np.ndarray:
    return np.asarray(a.sum(axis=1), dtype=float).ravel()


def _col_sums(a) -> np.ndarray:
    return np.asarray(a.sum(axis=0), dtype=float).ravel()


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    """Validated nonnegative weight matrix.

    Build instances with :func:`validate_graph`; :meth:`unchecked` skips the
    irreducibility checks and exists only for diagnostics on graphs the
    samplers must never see (for example a disconnected graph whose
    ``lambda2`` is zero).
    """

    weights: np.ndarray | sparse.csr_matrix
    directed: bool
    info: dict = field(default_factory=dict)

    @classmethod
    def unchecked(cls, weights) -> "WeightedDigraph":
        w = _as_matrix(weights, DENSE_MAX_NODES)
        return cls(w, not _is_symmetric(w))

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.weights)

    @cached_property
    def out_weights(self) -> np.ndarray:
        return _row_sums(self.weights)

    @cached_property
    def in_weights(self) -> np.ndarray:
        return _col_sums(self.weights)

    def dense(self) -> np.ndarray:
        return self.weights.toarray() if self.is_sparse else self.weights

    def row(self, j: int) -> np.ndarray:
        if self.is_sparse:
            return self.weights.getrow(j).toarray().ravel()
        return self.weights[j]

    def scaled(self, c: float) -> "WeightedDigraph":
        return WeightedDigraph(self.weights * c, self.directed, dict(self.info))


def _as_matrix(weights, dense_max: int):
    if sparse.issparse(weights):
        w = sparse.csr_matrix(weights, dtype=float)
        w.sum_duplicates()
        w.eliminate_zeros()
        if w.shape[0] <= dense_max:
            return w.toarray()
        return w
    w = np.array(weights, dtype=float)
    if w.ndim == 2 and w.shape[0] > dense_max:
        return sparse.csr_matrix(w)
    return w


def _is_symmetric(w) -> bool:
    if sparse.issparse(w):
        return (w != w.T).nnz == 0
    return bool(np.array_equal(w, w.T))


def _unreachable_pair(w) -> tuple[int, int] | None:
    """Return ``(src, dst)`` with ``dst`` unreachable from ``src``, or None."""
    if not sparse.issparse(w):
        positive = w > 0
        np.fill_diagonal(positive, True)
        if positive.all():
            return None
    adj =sparse.csr_matrix(w > 0) if not sparse.issparse(w) else (w > 0).tocsr()
    m = adj.shape[0]
    fwd = csgraph.breadth_first_order(adj, 0, directed=True, return_predecessors=False)
    if len(fwd) < m:
        seen = np.zeros(m, dtype=bool)
        seen[fwd] = True
        return 0, int(np.flatnonzero(~seen)[0])
    bwd = csgraph.breadth_first_order(adj.T.tocsr(), 0, directed=True, return_predecessors=False)
    if len(bwd) < m:
        seen = np.zeros(m, dtype=bool)
        seen[bwd] = True
        return int(np.flatnonzero(~seen)[0]), 0
    return None


def validate_graph(weights, *, dense_max: int = DENSE_MAX_NODES) -> WeightedDigraph:
    """Validate a weight matrix and wrap it as a :class:`WeightedDigraph`.

    Self-loops are allowed.  Raises :class:`NegativeWeight`,
    :class:`ZeroOutDegree` or :class:`NotStronglyConnected`.
    """
    w = _as_matrix(weights, dense_max)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError(f"weight matrix must be square, got shape {w.shape}")
    if w.shape[0] < 2:
        raise ValidationError("graph needs at least 2 nodes")
    vals = w.data if sparse.issparse(w) else w
    if not np.all(np.isfinite(vals)):
        raise ValidationError("weights must be finite")
    if np.any(vals < 0):
        raise NegativeWeight("weights must be nonnegative")
    d = _row_sums(w)
    zero = np.flatnonzero(d <= 0)
    if zero.size:
        raise ZeroOutDegree(int(zero[0]))
    pair = _unreachable_pair(w)
    if pair is not None:
        raise NotStronglyConnected(*pair)
    return WeightedDigraph(w, not _is_symmetric(w))


def check_circulation(g: WeightedDigraph, tol: float = CIRCULATION_RTOL) -> bool:
    """True when every node's out-weight matches its in-weight (relative ``tol``)."""
    d = g.out_weights
    return bool(np.max(np.abs(d - g.in_weights)) <= tol * np.max(d))


# kernels ---------------------------------------------------------------------

class KernelMode(str, enum.Enum):
    CIRCULATION = "circulation"
    GENERAL_FORWARD = "general_forward"


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Row-stochastic transition matrix with its stationary vector.

    ``d`` holds the out-weights of the matrix the walk was derived from; it is
    informational except in circulation mode, where ``pi`` is ``d / d.sum()``.
    """

    p: np.ndarray | sparse.csr_matrix
    d: np.ndarray
    pi: np.ndarray
    mode: KernelMode

    @property
    def m(self) -> int:
        return self.p.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.p)

    def dense(self) -> np.ndarray:
        return self.p.toarray() if self.is_sparse else self.p

    def submatrix(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        if self.is_sparse:
            return self.p[rows][:, cols].toarray()
        return self.p[np.ix_(rows, cols)]

    @cached_property
    def walk_rows(self) -> tuple[list, list]:
        """Per-row successor ids and cumulative probabilities for inverse-CDF steps.

        Only positive entries are kept and each cumulative row ends at
        exactly 1.0, so ``bisect_right(cum, u)`` with ``u`` in [0, 1) always
        lands on a valid successor.
        """
        p = self.p.tocsr() if self.is_sparse else sparse.csr_matrix(self.p)
        as_lists = p.nnz <= _LIST_TABLE_MAX_NNZ
        nbrs, cums = [], []
        for j in range(p.shape[0]):
            lo, hi = p.indptr[j], p.indptr[j + 1]
            idx = p.indices[lo:hi]
            cum = np.cumsum(p.data[lo:hi])
            cum /= cum[-1]
            cum[-1] = 1.0
            if as_lists:
                nbrs.append(idx.tolist())
                cums.append(cum.tolist())
            else:
                nbrs.append(idx.copy())
                cums.append(cum)
        return nbrs, cums

    def is_reversible(self, tol: float = 1e-10) -> bool:
        """Detailed balance ``pi_j p_jl == pi_l p_lj`` within ``tol`` (max-norm)."""
        flow = self.p.multiply(self.pi[:, None]) if self.is_sparse else self.pi[:, None] * self.p
        diff = flow - flow.T
        if sparse.issparse(diff):
            return diff.nnz == 0 or float(abs(diff).max()) <= tol
        return float(np.max(np.abs(diff))) <= tol


def _normalize_rows(w, d):
    if sparse.issparse(w):
        return sparse.csr_matrix(sparse.diags(1.0 / d) @ w)
    return w / d[:, None]


def build_kernel_circulation(g: WeightedDigraph, tol: float = CIRCULATION_RTOL) -> TransitionKernel:
    """Walk directly on ``W``; stationary vector proportional to out-weights."""
    if not check_circulation(g, tol):
        raise NotCirculation("row sums differ from column sums")
    d = g.out_weights
    return TransitionKernel(_normalize_rows(g.weights, d), d, d / d.sum(), KernelMode.CIRCULATION)


def _gth_stationary(p: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman elimination for a dense row-stochastic matrix."""
    a = np.array(p, dtype=float)
    np.fill_diagonal(a, 0.0)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        if s <= 0:
            raise StationaryNotConverged(0, "reducible chain in GTH elimination")
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ a[:k, k]
    return pi / pi.sum()


def stationary_distribution(
    p,
    tol: float = STATIONARY_TOL,
    max_iter: int = STATIONARY_MAX_ITER,
    dense_max: int = STATIONARY_DENSE_MAX,
) -> np.ndarray:
    """Stationary vector of an irreducible row-stochastic matrix.

    Power iteration runs on the lazy chain ``(I + P) / 2`` (same stationary
    vector, no periodicity trouble) from the uniform vector until
    ``max|x P - x| <= tol``.  For ``m <= dense_max`` a stalled iteration falls
    back to GTH elimination after a short budget instead of spending the full
    ``max_iter``.
    """
    m = p.shape[0]
    pt = p.T.tocsr() if sparse.issparse(p) else p.T
    x = np.full(m, 1.0 / m)
    budget = min(max_iter, 20_000) if m <= dense_max else max_iter
    it = 0
    converged = False
    for it in range(1, budget + 1):
        xp = pt @ x
        if np.max(np.abs(xp - x)) <= tol:
            converged = True
            x = xp
            break
        x = 0.5 * (x + xp)
        x /= x.sum()
    if not converged:
        if m <= dense_max:
            pd = p.toarray() if sparse.issparse(p) else p
            x = _gth_stationary(pd)
        else:
            raise StationaryNotConverged(it)
    x = x / x.sum()
    if np.min(x) < STATIONARY_FLOOR:
        raise StationaryNotConverged(it, f"stationary entry {np.min(x):.3e} below {STATIONARY_FLOOR}")
    return x


def build_kernel_general(g: WeightedDigraph) -> TransitionKernel:
    """Forward chain whose cover-walk tree law is proportional to the product of ``Q``.

    The reversed chain moves ``l -> j`` with probability ``q[j, l] / c[l]``
    where ``c`` are the in-weights.  With ``pi*`` its stationary vector, the
    forward chain is ``p[j, l] = q[j, l] * pi*[l] / (c[l] * pi*[j])``, which
    has ``pi*`` as its own stationary vector.
    """
    q = g.weights
    c = g.in_weights
    reversed_p = _normalize_rows(q.T.tocsr() if sparse.issparse(q) else q.T, c)
    pi = stationary_distribution(reversed_p)
    if sparse.issparse(q):
        p = sparse.csr_matrix(sparse.diags(1.0 / pi) @ q @ sparse.diags(pi / c))
    else:
        p = q * (pi / c)[None, :] / pi[:, None]
    p = _normalize_rows(p, _row_sums(p))
    resid = np.max(np.abs((p.T @ pi) - pi))
    if resid > 1e-10:
        raise StationaryNotConverged(0, f"forward chain residual {resid:.3e}")
    return TransitionKernel(p, g.out_weights, pi, KernelMode.GENERAL_FORWARD)


def build_kernel(g: WeightedDigraph) -> TransitionKernel:
    """Circulation kernel when the graph qualifies, general forward kernel otherwise."""
    if check_circulation(g):
        return build_kernel_circulation(g)
    return build_kernel_general(g)


# roots -----------------------------------------------------------------------

@dataclass(frozen=True)
class RootDistribution:
    """Root law ``Pr(r) ~ g_r / rho_r``; ``rho`` is only defined up to a constant."""

    probs: np.ndarray
    rho: np.ndarray

    def sample(self, rng: np.random.Generator) -> int:
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return int(np.searchsorted(cum, rng.random(), side="right"))


def root_distribution(g: WeightedDigraph, kernel: TransitionKernel, root_scores=None) -> RootDistribution:
    """Distribution over roots making ``Pr(r, T)`` proportional to ``g_r`` times the tree weight.

    ``rho_r`` is constant for circulation kernels and proportional to
    ``in_weight[r] / pi*[r]`` for general forward kernels.
    """
    m = g.m
    scores = np.ones(m) if root_scores is None else np.asarray(root_scores, dtype=float)
    if scores.shape != (m,):
        raise ValidationError(f"root_scores must have length {m}")
    if np.any(scores < 0) or not np.all(np.isfinite(scores)):
        raise ValidationError("root_scores must be finite and nonnegative")
    if not np.any(scores > 0):
        raise AllZeroScores("at least one root score must be positive")
    if kernel.mode is KernelMode.CIRCULATION:
        rho = np.ones(m)
    else:
        rho = g.in_weights / kernel.pi
        rho = rho / rho.min()
    probs = scores / rho
    return RootDistribution(probs / probs.sum(), rho)


def escape_time_estimate(g: WeightedDigraph, visited) -> float:
    """Smallest ratio of within-set to outgoing weight over the visited nodes.

    Returns ``inf`` when no visited node has an edge leaving the set.
    """
    m = g.m
    inside = np.zeros(m, dtype=bool)
    inside[list(visited)] = True
    if not inside.any() or inside.all():
        raise ValidationError("visited set must be a nonempty proper subset")
    rows = np.flatnonzero(inside)
    if g.is_sparse:
        sub = g.weights[rows]
        w_in = np.asarray(sub[:, inside].sum(axis=1)).ravel()
        w_out = np.asarray(sub[:, ~inside].sum(axis=1)).ravel()
    else:
        w_in = g.weights[np.ix_(rows, inside)].sum(axis=1)
        w_out = g.weights[np.ix_(rows, ~inside)].sum(axis=1)
    ok = w_out > 0
    if not ok.any():
        return math.inf
    return float(np.min(w_in[ok] / w_out[ok]))


@dataclass(frozen=True)
class BottleneckReport:
    lambda2: float
    escape_estimate: float | None
    cover_bound: float


# edge-list files -------------------------------------------------------------

EDGE_HEADER = ["src", "dst", "weight"]
_HEADER_TEXT = "\t".join(EDGE_HEADER)


def read_edge_list(path, *, symmetrize: bool = False, m: int | None = None) -> WeightedDigraph:
    """Read a TSV edge list with header ``src<TAB>dst<TAB>weight`` (0-based ids)."""
    src, dst, wts = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != EDGE_HEADER:
            raise ValidationError(f"{path}: expected header {_HEADER_TEXT!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                a, b, w = int(row[0]), int(row[1]), float(row[2])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if a < 0 or b < 0:
                raise ValidationError(f"{path}:{lineno}: node ids must be nonnegative")
            src.append(a)
            dst.append(b)
            wts.append(w)
    if not src:
        raise ValidationError(f"{path}: no edges")
    n = m if m is not None else max(max(src), max(dst)) + 1
    mat = sparse.coo_matrix((wts, (src, dst)), shape=(n, n)).tocsr()
    if len(set(zip(src, dst))) != len(src):
        raise ValidationError(f"{path}: duplicate edges")
    if symmetrize:
        mat = mat.maximum(mat.T)
    return validate_graph(mat)


def write_edge_list(g: WeightedDigraph, path) -> None:
    w = sparse.coo_matrix(g.weights)
    order = np.lexsort((w.col, w.row))
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, delimiter="\t", lineterminator="\n")
        out.writerow(EDGE_HEADER)
        for k in order:
            out.writerow([int(w.row[k]), int(w.col[k]), repr(float(w.data[k]))])
