"""Exact tree laws and goodness-of-fit checks for sampler output.

The law of a tree rooted at ``r`` is proportional to the product of the
weights ``w[j, l]`` over its edges ``j -> l``.  It is enumerated by brute
force for small graphs and its normalizing constant is cross-checked with
the directed Matrix-Tree theorem.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import SingularLaplacian, TooLarge, UnknownTree, ValidationError
from .graph import WeightedDigraph
from .tree import SpanningTree

ENUM_MAX_NODES = 8
DETERMINANT_MAX_NODES = 512
GOF_ALPHA = 1e-3
MIN_EXPECTED = 5.0


@dataclass(frozen=True, eq=False)
class TreeLaw:
    """Exact distribution over the spanning trees rooted at ``root``."""

    root: int
    trees: list
    probs: np.ndarray
    partition: float
    index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index.update({t.key: i for i, t in enumerate(self.trees)})

    def prob(self, tree: SpanningTree) -> float:
        i = self.index.get(tree.key)
        if i is None:
            raise UnknownTree(f"tree {tree.key} is not in the support")
        return float(self.probs[i])

    def keys(self) -> list[str]:
        return [t.key for t in self.trees]


def enumerate_rooted_trees(g: WeightedDigraph, root: int, max_nodes: int = ENUM_MAX_NODES) -> TreeLaw:
    """All trees rooted at ``root`` with edges pointing away from it.

    Depth-first assignment of a parent to each non-root node, abandoning a
    branch as soon as the partial parent map contains a cycle.
    """
    m = g.m
    if m > max_nodes:
        raise TooLarge(m, max_nodes)
    if not 0 <= root < m:
        raise ValidationError(f"root {root} out of range")
    w = g.dense()
    others = [v for v in range(m) if v != root]
    candidates = {v: [j for j in range(m) if j != v and w[j, v] > 0] for v in others}
    parent = [-1] * m
    found: list[tuple[list[int], float]] = []

    def closes_cycle(v: int) -> bool:
        j = parent[v]
        while j != -1:
            if j == v:
                return True
            j = parent[j]
        return False

    def grow(k: int, weight: float) -> None:
        if k == len(others):
            found.append((parent.copy(), weight))
            return
        v = others[k]
        for j in candidates[v]:
            parent[v] = j
            if not closes_cycle(v):
                grow(k + 1, weight * w[j, v])
        parent[v] = -1

    grow(0, 1.0)
    if not found:
        raise SingularLaplacian(f"no spanning tree rooted at {root}")
    weights = np.array([wt for _, wt in found])
    partition = float(weights.sum())
    trees = [SpanningTree(root, np.array(p, dtype=np.int64)) for p, _ in found]
    return TreeLaw(root, trees, weights / partition, partition)


def matrix_tree_partition(g: WeightedDigraph, root: int) -> float:
    """Sum over trees rooted at ``root`` of the edge-weight product, via a determinant.

    Uses the in-degree Laplacian ``diag(sum_j w[j, l]) - W`` (self-loops
    dropped) with the root row and column deleted.
    """
    m = g.m
    if m > DETERMINANT_MAX_NODES:
        raise TooLarge(m, DETERMINANT_MAX_NODES)
    w = np.array(g.dense(), dtype=float)
    np.fill_diagonal(w, 0.0)
    lap = np.diag(w.sum(axis=0)) - w
    keep = np.arange(m) != root
    sign, logdet = np.linalg.slogdet(lap[np.ix_(keep, keep)])
    if sign <= 0 or not np.isfinite(logdet):
        raise SingularLaplacian(f"no spanning tree rooted at {root}")
    return float(np.exp(logdet))


def joint_law(g: WeightedDigraph, root_scores=None) -> dict[tuple[int, str], float]:
    """Exact ``Pr(r, T)`` proportional to ``g_r`` times the tree weight, over every root."""
    scores = np.ones(g.m) if root_scores is None else np.asarray(root_scores, dtype=float)
    out = {}
    for r in range(g.m):
        if scores[r] <= 0:
            continue
        law = enumerate_rooted_trees(g, r)
        for t, p in zip(law.trees, law.probs):
            out[(r, t.key)] = scores[r] * law.partition * p
    total = sum(out.values())
    return {k: v / total for k, v in out.items()}


# goodness of fit ---------------------------------------------------------------

@dataclass(frozen=True)
class GofReport:
    chi2: float
    dof: int
    pvalue: float
    tv: float
    n: int

    def passed(self, alpha: float = GOF_ALPHA) -> bool:
        return self.pvalue >= alpha

    def record(self, graph_id: str, root: int, algo: str) -> dict:
        return {"graph_id": graph_id, "root": int(root), "algo": algo, **asdict(self)}


def _merge_small(expected: np.ndarray, observed: np.ndarray, min_expected: float = MIN_EXPECTED):
    """Pool every category with expected count below ``min_expected`` into one bucket.

    If the pooled bucket is still too small it is folded into the smallest
    remaining category.
    """
    small = expected < min_expected
    if not small.any():
        return expected, observed
    e_big, o_big = expected[~small], observed[~small]
    e_pool, o_pool = expected[small].sum(), observed[small].sum()
    if e_pool >= min_expected or e_big.size == 0:
        return np.append(e_big, e_pool), np.append(o_big, o_pool)
    k = int(np.argmin(e_big))
    e_big, o_big = e_big.copy(), o_big.copy()
    e_big[k] += e_pool
    o_big[k] += o_pool
    return e_big, o_big


def _counts_for(law: TreeLaw, samples) -> np.ndarray:
    if isinstance(samples, dict):
        items = samples.items()
    elif hasattr(samples, "counts"):
        if samples.root != law.root:
            raise ValidationError("sample root differs from the law's root")
        items = samples.counts().items()
    else:
        trees = list(samples)
        if any(t.root != law.root for t in trees):
            raise ValidationError("sample root differs from the law's root")
        items = Counter(t.key for t in trees).items()
    counts = np.zeros(len(law.trees))
    for key, c in items:
        i = law.index.get(key)
        if i is None:
            raise UnknownTree(f"sampled tree {key} is not in the enumerated support")
        counts[i] += c
    return counts


def gof_test(law: TreeLaw, samples) -> GofReport:
    """Pearson chi-square of sampled trees against an exact law.

    ``samples`` may be a list of :class:`SpanningTree`, a ``{key: count}``
    mapping or a :class:`~ffcover.samplers.TreeBatch`.
    """
    counts = _counts_for(law, samples)
    n = int(counts.sum())
    if n == 0:
        raise ValidationError("no samples")
    tv = 0.5 * float(np.abs(counts / n - law.probs).sum())
    expected, observed = _merge_small(n * law.probs, counts)
    if expected.size < 2:
        return GofReport(0.0, 1, 1.0, tv, n)
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    dof = expected.size - 1
    return GofReport(chi2, dof, float(stats.chi2.sf(chi2, dof)), tv, n)


def two_sample_test(counts_a: dict, counts_b: dict) -> GofReport:
    """Chi-square homogeneity test between two ``{key: count}`` tables.

    Categories are pooled when their combined count is below ``2 * MIN_EXPECTED``.
    The reported ``tv`` is the distance between the two empirical laws.
    """
    keys = sorted(set(counts_a) | set(counts_b))
    a = np.array([counts_a.get(k, 0) for k in keys], dtype=float)
    b = np.array([counts_b.get(k, 0) for k in keys], dtype=float)
    na, nb = a.sum(), b.sum()
    if na == 0 or nb == 0:
        raise ValidationError("both samples must be nonempty")
    tv = 0.5 * float(np.abs(a / na - b / nb).sum())
    total = a + b
    small = total < 2 * MIN_EXPECTED
    if small.any():
        a = np.append(a[~small], a[small].sum())
        b = np.append(b[~small], b[small].sum())
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    if a.size < 2:
        return GofReport(0.0, 1, 1.0, tv, int(na + nb))
    chi2, pvalue, dof, _ = stats.chi2_contingency(np.vstack([a, b]), correction=False)
    return GofReport(float(chi2), int(dof), float(pvalue), tv, int(na + nb))


def write_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
