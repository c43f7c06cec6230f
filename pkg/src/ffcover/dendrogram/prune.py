"""Reduce a sampled spanning tree to a dendrogram by integrating out empty nodes.

Two rules are applied until neither fires (the root is never removed):

1. an empty node without children is dropped;
2. an empty node with exactly one child is spliced out, its parent adopting
   the child.  The merged edge remembers how many original edges it spans,
   so the Gaussian random walk along it has variance ``length * sigma / lam``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..tree import SpanningTree


@dataclass(frozen=True, eq=False)
class ReducedDendrogram:
    """Pruned tree: retained nodes, parent links, edge lengths, occupancy and assignments."""

    root: int
    parent: dict
    lengths: dict
    counts: dict
    assignments: np.ndarray

    @property
    def nodes(self) -> list[int]:
        return sorted(self.parent)

    def children(self) -> dict[int, list[int]]:
        kids = {v: [] for v in self.parent}
        for v, p in self.parent.items():
            if p >= 0:
                kids[p].append(v)
        return kids

    def depths(self) -> dict[int, int]:
        depth = {self.root: 0}
        kids = self.children()
        stack = [self.root]
        while stack:
            j = stack.pop()
            for l in kids[j]:
                depth[l] = depth[j] + 1
                stack.append(l)
        return depth

    def ancestor_at(self, node: int, depth: int) -> int:
        """Node at ``depth`` on the root path of ``node``, or -1 if ``node`` is shallower."""
        d = self.depths()
        if d[node] < depth:
            return -1
        v = node
        while d[v] > depth:
            v = self.parent[v]
        return v

    def to_json(self) -> str:
        nodes = self.nodes
        return json.dumps({
            "root": self.root,
            "nodes": nodes,
            "parent": [self.parent[v] for v in nodes],
            "lengths": [self.lengths[v] for v in nodes],
            "counts": [self.counts[v] for v in nodes],
        })

    @classmethod
    def from_tree(cls, tree: SpanningTree, counts, assignments) -> "ReducedDendrogram":
        """Wrap a spanning tree without pruning (unit edge lengths)."""
        parent = {v: int(p) for v, p in enumerate(tree.parent)}
        lengths = {v: (0 if p < 0 else 1) for v, p in parent.items()}
        return cls(tree.root, parent, lengths, {v: int(c) for v, c in enumerate(counts)},
                   np.asarray(assignments, dtype=np.int64))


def prune(tree: SpanningTree, counts, assignments=None, nodes=None) -> ReducedDendrogram:
    """Apply both pruning rules to a fixpoint.

    ``nodes`` restricts the tree to a subset (used by the reversible-jump
    baseline, whose trees do not span every node).
    """
    counts = np.asarray(counts)
    keep = range(tree.m) if nodes is None else nodes
    parent = {int(v): int(tree.parent[v]) for v in keep}
    lengths = {v: (0 if p < 0 else 1) for v, p in parent.items()}
    kids: dict[int, set] = {v: set() for v in parent}
    for v, p in parent.items():
        if p >= 0:
            kids[p].add(v)
    changed = True
    while changed:
        changed = False
        for v in list(parent):
            if v == tree.root or counts[v] > 0:
                continue
            p = parent[v]
            if not kids[v]:
                kids[p].discard(v)
            elif len(kids[v]) == 1:
                (c,) = kids[v]
                parent[c] = p
                lengths[c] += lengths[v]
                kids[p].discard(v)
                kids[p].add(c)
            else:
                continue
            del parent[v], lengths[v], kids[v]
            changed = True
    z = np.zeros(0, dtype=np.int64) if assignments is None else np.asarray(assignments, dtype=np.int64)
    return ReducedDendrogram(tree.root, parent, lengths, {v: int(counts[v]) for v in parent}, z)


def similarity_matrix(samples, depth: int) -> np.ndarray:
    """Fraction of samples in which two observations share their depth-``depth`` ancestor.

    Observations attached above that depth never pair; the diagonal is 1.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    n = len(samples[0].assignments)
    sim = np.zeros((n, n))
    for s in samples:
        anc = {v: s.ancestor_at(v, depth) for v in set(s.assignments.tolist())}
        a = np.array([anc[v] for v in s.assignments.tolist()], dtype=np.int64)
        sim += (a[:, None] == a[None, :]) & (a[:, None] >= 0)
    sim /= len(samples)
    np.fill_diagonal(sim, 1.0)
    return sim


def marginal_log_likelihood(dendro: ReducedDendrogram, data, sigma, lam: float) -> float:
    """Log density of the data with every node mean integrated out (root mean fixed at 0).

    Node means form a Gaussian random walk from the root, so
    ``cov(mu_a, mu_b) = shared_path_length(a, b) * sigma / lam``; observations
    add independent ``sigma`` noise.
    """
    y = np.asarray(data, dtype=float)
    y = y[:, None] if y.ndim == 1 else y
    n, d = y.shape
    sigma = np.atleast_2d(sigma)
    dist = {dendro.root: 0}
    order = [dendro.root]
    kids = dendro.children()
    for j in order:
        for l in kids[j]:
            dist[l] = dist[j] + dendro.lengths[l]
            order.append(l)

    def shared(a: int, b: int) -> int:
        path = set()
        while a >= 0:
            path.add(a)
            a = dendro.parent[a]
        while b not in path:
            b = dendro.parent[b]
        return dist[b]

    z = dendro.assignments.tolist()
    k = np.array([[shared(a, b) for b in z] for a in z], dtype=float) / lam
    cov = np.kron(k + np.eye(n), sigma)
    return float(stats.multivariate_normal(np.zeros(n * d), cov).logpdf(y.reshape(-1)))
