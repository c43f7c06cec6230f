"""Spanning-tree-augmented Gaussian dendrogram and its blocked Gibbs sampler.

Node 0 is the root with its mean pinned at 0.  Given a spanning tree over
``m_tilde`` nodes, child means are Gaussian around their parent's mean with
covariance ``sigma / lam``; observations are Gaussian around the mean of the
node they are assigned to, with covariance ``sigma``.  Mixture weights have a
symmetric Dirichlet prior and ``sigma`` an inverse-Wishart prior.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy import stats
from scipy.special import logsumexp

from ..errors import PrecisionNotPD, ValidationError
from ..graph import build_kernel_circulation, validate_graph
from ..samplers import KappaPolicy, fast_forwarded_cover
from ..tree import SpanningTree

ROOT = 0
# edge log-weights below the largest by more than this are clamped, so the
# complete graph stays strongly connected after exponentiation
LOG_WEIGHT_FLOOR = 600.0


@dataclass(frozen=True)
class ModelConfig:
    m_tilde: int
    lam: float = 0.25
    nu: float = 2.0
    sigma0: np.ndarray = field(default_factory=lambda: 0.04 * np.eye(2))
    alpha_dir: float = 0.1
    kappa: KappaPolicy = KappaPolicy.fixed(1000)

    def __post_init__(self):
        s0 = np.atleast_2d(np.asarray(self.sigma0, dtype=float))
        object.__setattr__(self, "sigma0", s0)
        d = s0.shape[0]
        if self.m_tilde < 2:
            raise ValidationError("m_tilde must be at least 2")
        if not self.lam > 0 or not self.alpha_dir > 0:
            raise ValidationError("lam and alpha_dir must be positive")
        if not self.nu > d - 1:
            raise ValidationError("nu must exceed dimension - 1")
        if s0.shape != (d, d) or not np.allclose(s0, s0.T):
            raise ValidationError("sigma0 must be a symmetric square matrix")
        if np.linalg.eigvalsh(s0).min() <= 0:
            raise ValidationError("sigma0 must be positive definite")

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]

    @classmethod
    def default(cls, n: int, d: int, **overrides) -> "ModelConfig":
        """Defaults scaled to the data: ``m_tilde = n // 4``, ``nu = n``, ``sigma0 = 0.2**2 I``."""
        base = dict(m_tilde=max(2, n // 4), nu=float(n), sigma0=0.04 * np.eye(d))
        base.update(overrides)
        return cls(**base)


@dataclass
class GibbsState:
    tree: SpanningTree
    z: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    weights: np.ndarray

    def counts(self) -> np.ndarray:
        return np.bincount(self.z, minlength=len(self.weights))

    def copy(self) -> "GibbsState":
        return replace(self, z=self.z.copy(), mu=self.mu.copy(), sigma=self.sigma.copy(),
                       weights=self.weights.copy())


def _as_data(data) -> np.ndarray:
    y = np.asarray(data, dtype=float)
    return y[:, None] if y.ndim == 1 else y


def initial_state(data, cfg: ModelConfig, rng: np.random.Generator) -> GibbsState:
    """Non-root means at randomly chosen observations, star tree, nearest-mean assignments."""
    y = _as_data(data)
    n, d = y.shape
    m = cfg.m_tilde
    mu = np.zeros((m, d))
    if n:
        mu[1:] = y[rng.integers(0, n, m - 1)] + 0.1 * rng.standard_normal((m - 1, d))
    sigma = np.cov(y.T).reshape(d, d) if n > d else np.eye(d)
    if np.linalg.eigvalsh(sigma).min() <= 1e-8:
        sigma = np.eye(d)
    parent = np.zeros(m, dtype=np.int64)
    parent[ROOT] = -1
    weights = np.full(m, 1.0 / m)
    state = GibbsState(SpanningTree(ROOT, parent), np.zeros(n, dtype=np.int64), mu, sigma, weights)
    state.z = update_assignments(state, y, rng)
    return state


# full conditionals -------------------------------------------------------------

def _mahalanobis_pairs(mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    chol = np.linalg.cholesky(sigma)
    white = scipy.linalg.solve_triangular(chol, mu.T, lower=True).T
    sq = (white ** 2).sum(axis=1)
    return np.maximum(sq[:, None] + sq[None, :] - 2.0 * white @ white.T, 0.0)


def tree_edge_weights(mu: np.ndarray, sigma: np.ndarray, lam: float) -> np.ndarray:
    """Symmetric edge weights proportional to the Gaussian kernel between node means.

    Computed in log space, shifted so the largest off-diagonal weight is 1,
    and clamped from below at ``exp(-LOG_WEIGHT_FLOOR)``.
    """
    logq = -0.5 * lam * _mahalanobis_pairs(mu, sigma)
    m = len(mu)
    off = ~np.eye(m, dtype=bool)
    logq -= logq[off].max()
    w = np.exp(np.maximum(logq, -LOG_WEIGHT_FLOOR))
    w[~off] = 0.0
    return 0.5 * (w + w.T)


def update_tree(state: GibbsState, cfg: ModelConfig, rng: np.random.Generator) -> SpanningTree:
    """Draw the spanning tree from its full conditional with the fast-forwarded cover sampler."""
    m = len(state.mu)
    if m == 2:
        return SpanningTree(ROOT, np.array([-1, ROOT]))
    g = validate_graph(tree_edge_weights(state.mu, state.sigma, cfg.lam))
    kernel = build_kernel_circulation(g)
    tree, _ = fast_forwarded_cover(kernel, ROOT, cfg.kappa, rng)
    return tree


def assignment_log_probs(y: np.ndarray, mu: np.ndarray, sigma: np.ndarray, weights: np.ndarray,
                         active: np.ndarray | None = None) -> np.ndarray:
    """Row-normalized ``log Pr(z_i = k)``; inactive components get ``-inf``."""
    chol = np.linalg.cholesky(sigma)
    diff = y[:, None, :] - mu[None, :, :]
    white = scipy.linalg.solve_triangular(chol, diff.reshape(-1, y.shape[1]).T, lower=True)
    quad = (white ** 2).sum(axis=0).reshape(len(y), len(mu))
    with np.errstate(divide="ignore"):
        logp = np.log(weights)[None, :] - 0.5 * quad
    if active is not None:
        logp[:, ~active] = -np.inf
    return logp - logsumexp(logp, axis=1, keepdims=True)


def update_assignments(state: GibbsState, data, rng: np.random.Generator,
                       active: np.ndarray | None = None) -> np.ndarray:
    """Independent categorical draws ``Pr(z_i = k) ~ w_k N(y_i; mu_k, sigma)``."""
    y = _as_data(data)
    if len(y) == 0:
        return np.zeros(0, dtype=np.int64)
    cum = np.cumsum(np.exp(assignment_log_probs(y, state.mu, state.sigma, state.weights, active)), axis=1)
    cum[:, -1] = 1.0
    u = rng.random(len(y))
    z = (cum <= u[:, None]).sum(axis=1)
    if active is not None:
        # guard against round-off landing on a zero-width inactive category
        bad = ~active[z]
        if bad.any():
            z[bad] = np.argmax(cum[bad] > u[bad, None], axis=1)
    return z.astype(np.int64)


def update_weights(z, cfg: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet full conditional ``Dir(alpha + n_1, ..., alpha + n_m)``."""
    counts = np.bincount(np.asarray(z, dtype=np.int64), minlength=cfg.m_tilde)
    return rng.dirichlet(cfg.alpha_dir + counts)


def _tree_laplacian(parent: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    m = len(parent)
    lap = np.zeros((m, m))
    for v in nodes:
        p = parent[v]
        if p >= 0:
            lap[v, v] += 1
            lap[p, p] += 1
            lap[v, p] -= 1
            lap[p, v] -= 1
    return lap


@dataclass(frozen=True)
class NIWPosterior:
    """Normal-inverse-Wishart full conditional of the non-root means and ``sigma``.

    ``sigma ~ IW(dof, scale)`` and, given ``sigma``, the stacked means are
    matrix normal with mean ``mean``, row covariance ``precision^-1`` and
    column covariance ``sigma``.
    """

    nodes: np.ndarray
    precision: np.ndarray
    mean: np.ndarray
    dof: float
    scale: np.ndarray

    def logpdf(self, mu_nodes: np.ndarray, sigma: np.ndarray) -> float:
        k, d = self.mean.shape
        out = stats.invwishart(df=self.dof, scale=self.scale).logpdf(sigma)
        resid = mu_nodes - self.mean
        sig_inv = np.linalg.inv(sigma)
        _, logdet_p = np.linalg.slogdet(self.precision)
        _, logdet_s = np.linalg.slogdet(sigma)
        quad = np.trace(sig_inv @ resid.T @ self.precision @ resid)
        return float(out - 0.5 * k * d * np.log(2 * np.pi) + 0.5 * d * logdet_p
                     - 0.5 * k * logdet_s - 0.5 * quad)


def niw_posterior(state: GibbsState, data, cfg: ModelConfig, active: np.ndarray | None = None) -> NIWPosterior:
    """Complete the square in the joint exponent.

    With ``A = lam * L_tree`` (root row and column removed) plus
    ``diag(n_k)``, ``B`` the per-node data sums and ``C = sum y y^T``, the
    exponent is ``-tr(sigma^-1 [C - 2 B^T M + M^T A M]) / 2``.  Hence
    ``M | sigma`` is matrix normal around ``A^-1 B`` and, after integrating
    ``M`` out, ``sigma ~ IW(nu + n, sigma0 + C - B^T A^-1 B)``.
    """
    y = _as_data(data)
    n, d = y.shape
    m = len(state.mu)
    on = np.ones(m, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    nodes = np.flatnonzero(on & (np.arange(m) != ROOT))
    lap = _tree_laplacian(state.tree.parent, nodes)
    counts = np.bincount(state.z, minlength=m) if n else np.zeros(m, dtype=np.int64)
    a = cfg.lam * lap[np.ix_(nodes, nodes)] + np.diag(counts[nodes].astype(float))
    sums = np.zeros((m, d))
    if n:
        np.add.at(sums, state.z, y)
    b = sums[nodes]
    c = y.T @ y
    try:
        chol = scipy.linalg.cho_factor(a, lower=True)
    except np.linalg.LinAlgError:
        raise PrecisionNotPD("mean precision matrix is not positive definite") from None
    mean = scipy.linalg.cho_solve(chol, b)
    scale = cfg.sigma0 + c - b.T @ mean
    scale = 0.5 * (scale + scale.T)
    return NIWPosterior(nodes, a, mean, cfg.nu + n, scale)


def update_params(state: GibbsState, data, cfg: ModelConfig, rng: np.random.Generator,
                  active: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Joint draw of the non-root means and ``sigma``; inactive nodes keep their means."""
    post = niw_posterior(state, data, cfg, active)
    d = post.scale.shape[0]
    sigma = np.atleast_2d(stats.invwishart(df=post.dof, scale=post.scale).rvs(random_state=rng)).reshape(d, d)
    try:
        chol_a = np.linalg.cholesky(post.precision)
        chol_s = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise PrecisionNotPD("posterior draw is not positive definite") from None
    noise = rng.standard_normal(post.mean.shape)
    draw = post.mean + scipy.linalg.solve_triangular(chol_a.T, noise, lower=False) @ chol_s.T
    mu = state.mu.copy()
    mu[post.nodes] = draw
    mu[ROOT] = 0.0
    return mu, sigma


def log_joint(state: GibbsState, data, cfg: ModelConfig, active: np.ndarray | None = None) -> float:
    """Unnormalized log density of ``(mu, sigma)`` given tree, assignments and data.

    Data likelihood times the tree prior on the means times the
    inverse-Wishart prior, each with all ``sigma``-dependent factors kept.
    """
    y = _as_data(data)
    n, d = y.shape
    m = len(state.mu)
    on = np.ones(m, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    out = stats.invwishart(df=cfg.nu, scale=cfg.sigma0).logpdf(state.sigma)
    if n:
        out += stats.multivariate_normal(np.zeros(d), state.sigma).logpdf(y - state.mu[state.z]).sum()
    edge_cov = state.sigma / cfg.lam
    for v in np.flatnonzero(on):
        p = state.tree.parent[v]
        if p >= 0:
            out += stats.multivariate_normal(state.mu[p], edge_cov).logpdf(state.mu[v])
    return float(out)


# driver ----------------------------------------------------------------------

def sweep(state: GibbsState, data, cfg: ModelConfig, rng: np.random.Generator) -> GibbsState:
    """One pass: tree, assignments, weights, then means and covariance."""
    state.tree = update_tree(state, cfg, rng)
    state.z = update_assignments(state, data, rng)
    state.weights = update_weights(state.z, cfg, rng)
    state.mu, state.sigma = update_params(state, data, cfg, rng)
    return state


def gibbs_run(data, cfg: ModelConfig, iters: int, burnin: int, thin: int = 1, rng=None,
              *, state: GibbsState | None = None):
    """Run the blocked Gibbs sampler.

    Returns ``(samples, diagnostics)``: pruned dendrograms from every
    ``thin``-th post-burn-in sweep, and diagnostics over the unthinned
    post-burn-in traces.
    """
    from .diagnostics import ChainDiagnostics, tree_summaries
    from .prune import prune

    if iters < burnin or burnin < 0 or thin < 1:
        raise ValidationError("need 0 <= burnin <= iters and thin >= 1")
    rng = np.random.default_rng(rng)
    y = _as_data(data)
    state = initial_state(y, cfg, rng) if state is None else state
    samples, rows = [], []
    t0 = time.perf_counter_ns()
    for it in range(iters):
        sweep(state, y, cfg, rng)
        if it < burnin:
            continue
        reduced = prune(state.tree, state.counts(), state.z)
        rows.append(tree_summaries(reduced))
        if (it - burnin) % thin == thin - 1:
            samples.append(reduced)
    diag = ChainDiagnostics.from_rows(rows, wall_nanos=time.perf_counter_ns() - t0)
    return samples, diag
