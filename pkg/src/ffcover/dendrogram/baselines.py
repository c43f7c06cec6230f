"""Baseline tree moves: reversible-jump birth/death and subtree prune-regraft.

Both chains share the assignment, weight and mean/covariance updates with
the Gibbs sampler and differ only in how the tree is moved.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..errors import ValidationError
from ..tree import SpanningTree
from .diagnostics import ChainDiagnostics, tree_summaries
from .model import (
    ROOT,
    GibbsState,
    ModelConfig,
    _as_data,
    initial_state,
    update_assignments,
    update_params,
    update_weights,
)
from .prune import prune

P_BIRTH = 0.1
NODE_PRIOR = 0.01


def move_probabilities(n_nodes: int, max_nodes: int, p0: float = P_BIRTH) -> tuple[float, float]:
    """``(p_birth, p_death)`` for a tree with ``n_nodes`` nodes."""
    p_birth = p0 if n_nodes < max_nodes else 0.0
    p_death = 1.0 - p0 if n_nodes > 1 else 0.0
    return p_birth, p_death


def birth_acceptance(n_nodes: int, n_empty_leaves_after: int, p_birth: float, p_death_after: float) -> float:
    """Acceptance probability of adding a leaf to a tree with ``n_nodes`` nodes."""
    ratio = NODE_PRIOR * p_death_after / n_empty_leaves_after / (p_birth / n_nodes)
    return min(1.0, ratio)


def death_acceptance(n_nodes_after: int, n_empty_leaves: int, p_birth_after: float, p_death: float) -> float:
    """Acceptance probability of removing one of ``n_empty_leaves`` empty leaves."""
    ratio = (p_birth_after / n_nodes_after) / (NODE_PRIOR * p_death / n_empty_leaves)
    return min(1.0, ratio)


def _empty_leaves(parent: np.ndarray, active: np.ndarray, counts: np.ndarray) -> np.ndarray:
    has_child = np.zeros(len(parent), dtype=bool)
    kids = parent[active & (parent >= 0)]
    has_child[kids] = True
    return np.flatnonzero(active & ~has_child & (counts == 0))


def rj_tree_move(state: GibbsState, active: np.ndarray, cfg: ModelConfig, rng: np.random.Generator,
                 p0: float = P_BIRTH) -> str:
    """One birth or death proposal; updates ``state`` and ``active`` in place.

    Returns ``"birth"``, ``"death"``, ``"rejected"`` or ``"skipped"``.
    """
    m = len(active)
    parent = state.tree.parent.copy()
    counts = state.counts()
    size = int(active.sum())
    p_birth, p_death = move_probabilities(size, m, p0)
    if rng.random() < p0:
        if p_birth == 0.0:
            return "skipped"
        nodes = np.flatnonzero(active)
        j = int(nodes[rng.integers(len(nodes))])
        l = int(np.flatnonzero(~active)[0])
        chol = np.linalg.cholesky(state.sigma / cfg.lam)
        new_mu = state.mu[j] + chol @ rng.standard_normal(len(state.sigma))
        parent[l] = j
        grown = active.copy()
        grown[l] = True
        n_el = len(_empty_leaves(parent, grown, counts))
        _, p_death_after = move_probabilities(size + 1, m, p0)
        if rng.random() < birth_acceptance(size, n_el, p_birth, p_death_after):
            active[l] = True
            state.mu[l] = new_mu
            state.tree = SpanningTree(ROOT, parent)
            return "birth"
        return "rejected"
    if p_death == 0.0:
        return "skipped"
    leaves = _empty_leaves(parent, active, counts)
    if len(leaves) == 0:
        return "skipped"
    j = int(leaves[rng.integers(len(leaves))])
    p_birth_after, _ = move_probabilities(size - 1, m, p0)
    if rng.random() < death_acceptance(size - 1, len(leaves), p_birth_after, p_death):
        parent[j] = -1
        active[j] = False
        state.tree = SpanningTree(ROOT, parent)
        return "death"
    return "rejected"


def _edge_logpdf(x: np.ndarray, centre: np.ndarray, chol: np.ndarray, lam: float) -> float:
    white = np.linalg.solve(chol, x - centre)
    return -0.5 * lam * float(white @ white)


def spr_acceptance(state: GibbsState, omega: int, zeta: int, cfg: ModelConfig) -> float:
    """Acceptance probability of moving ``omega``'s subtree under ``zeta``.

    Given means and assignments, the data likelihood does not depend on the
    tree, so the ratio reduces to the Gaussian edge factor of ``omega``.
    """
    chol = np.linalg.cholesky(state.sigma)
    old = int(state.tree.parent[omega])
    log_ratio = (_edge_logpdf(state.mu[omega], state.mu[zeta], chol, cfg.lam)
                 - _edge_logpdf(state.mu[omega], state.mu[old], chol, cfg.lam))
    return 1.0 if log_ratio >= 0 else math.exp(log_ratio)


def _subtree(parent: np.ndarray, omega: int) -> np.ndarray:
    m = len(parent)
    inside = np.zeros(m, dtype=bool)
    inside[omega] = True
    changed = True
    while changed:
        grow = (parent >= 0) & inside[np.maximum(parent, 0)] & ~inside
        changed = bool(grow.any())
        inside |= grow
    return inside


def spr_tree_move(state: GibbsState, cfg: ModelConfig, rng: np.random.Generator) -> bool:
    """Prune a uniform non-root node's subtree and regraft it under a uniform outside node."""
    parent = state.tree.parent
    m = len(parent)
    omega = int(rng.integers(1, m))
    outside = np.flatnonzero(~_subtree(parent, omega))
    zeta = int(outside[rng.integers(len(outside))])
    if rng.random() < spr_acceptance(state, omega, zeta, cfg):
        new_parent = parent.copy()
        new_parent[omega] = zeta
        state.tree = SpanningTree(ROOT, new_parent)
        return True
    return False


def _run(tree_move, data, cfg, iters, burnin, thin, rng, restrict: bool):
    if iters < burnin or burnin < 0 or thin < 1:
        raise ValidationError("need 0 <= burnin <= iters and thin >= 1")
    rng = np.random.default_rng(rng)
    y = _as_data(data)
    state = initial_state(y, cfg, rng)
    m = cfg.m_tilde
    active = np.ones(m, dtype=bool)
    if restrict:
        # start from the root alone, everything assigned to it
        active[:] = False
        active[ROOT] = True
        parent = np.full(m, -1, dtype=np.int64)
        state.tree = SpanningTree(ROOT, parent)
        state.z = np.zeros(len(y), dtype=np.int64)
    mask = active if restrict else None
    samples, rows = [], []
    t0 = time.perf_counter_ns()
    for it in range(iters):
        tree_move(state, active, rng)
        state.z = update_assignments(state, y, rng, mask)
        state.weights = update_weights(state.z, cfg, rng)
        state.mu, state.sigma = update_params(state, y, cfg, rng, mask)
        if it < burnin:
            continue
        reduced = prune(state.tree, state.counts(), state.z, np.flatnonzero(active))
        rows.append(tree_summaries(reduced))
        if (it - burnin) % thin == thin - 1:
            samples.append(reduced)
    return samples, ChainDiagnostics.from_rows(rows, wall_nanos=time.perf_counter_ns() - t0)


def rj_run(data, cfg: ModelConfig, iters: int, burnin: int, rng=None, *, thin: int = 1, p0: float = P_BIRTH):
    """Reversible-jump chain over directly specified dendrograms.

    The tree holds only the active nodes; observations can only be assigned
    to active nodes.  Returns ``(samples, diagnostics)`` like ``gibbs_run``.
    """
    def move(state, active, rng):
        rj_tree_move(state, active, cfg, rng, p0)

    return _run(move, data, cfg, iters, burnin, thin, rng, restrict=True)


def spr_run(data, cfg: ModelConfig, iters: int, burnin: int, rng=None, *, thin: int = 1):
    """Subtree prune-regraft chain on the full ``m_tilde``-node spanning tree."""
    def move(state, active, rng):
        spr_tree_move(state, cfg, rng)

    return _run(move, data, cfg, iters, burnin, thin, rng, restrict=False)
