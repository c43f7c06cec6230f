"""Small-graph corpus for exactness checks.

* every connected symmetric graph on 2 to 4 nodes with edge weights in
  {1, 2}, one representative per isomorphism class;
* 10 random symmetric weighted graphs on 5 nodes;
* 5 directed circulation graphs and 5 general directed graphs on 4 nodes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph import WeightedDigraph, check_circulation, validate_graph

CORPUS_SEED = 20240607


@dataclass(frozen=True, eq=False)
class CorpusGraph:
    graph_id: str
    graph: WeightedDigraph
    family: str


def _canonical(w: np.ndarray) -> tuple:
    m = w.shape[0]
    best = None
    for perm in itertools.permutations(range(m)):
        p = list(perm)
        key = tuple(w[np.ix_(p, p)][np.triu_indices(m, 1)].astype(int))
        if best is None or key < best:
            best = key
    return best


def symmetric_small_graphs(max_nodes: int = 4, weight_levels=(1, 2)) -> list[CorpusGraph]:
    """Connected symmetric graphs up to isomorphism, weights from ``weight_levels``."""
    out = []
    for m in range(2, max_nodes + 1):
        pairs = list(itertools.combinations(range(m), 2))
        seen = set()
        for assign in itertools.product((0, *weight_levels), repeat=len(pairs)):
            w = np.zeros((m, m))
            for (a, b), x in zip(pairs, assign):
                w[a, b] = w[b, a] = x
            try:
                g = validate_graph(w)
            except ValueError:
                continue
            key = _canonical(w)
            if key in seen:
                continue
            seen.add(key)
            out.append(CorpusGraph(f"sym{m}-{len(seen):03d}", g, "symmetric"))
    return out


def random_weighted_graphs(count: int = 10, m: int = 5, rng=None) -> list[CorpusGraph]:
    rng = np.random.default_rng(rng if rng is not None else CORPUS_SEED)
    out = []
    while len(out) < count:
        mask = np.triu(rng.random((m, m)) < 0.7, 1)
        w = np.where(mask, rng.uniform(0.2, 3.0, (m, m)), 0.0)
        w = w + w.T
        try:
            g = validate_graph(w)
        except ValueError:
            continue
        out.append(CorpusGraph(f"rand{m}-{len(out):02d}", g, "weighted"))
    return out


def circulation_graphs(count: int = 5, m: int = 4, rng=None) -> list[CorpusGraph]:
    """Asymmetric circulations built as positive combinations of directed cycles."""
    rng = np.random.default_rng(rng if rng is not None else CORPUS_SEED + 1)
    out = []
    while len(out) < count:
        w = np.zeros((m, m))
        for _ in range(3):
            k = int(rng.integers(2, m + 1))
            cyc = rng.permutation(m)[:k]
            wt = rng.uniform(0.5, 2.0)
            for a, b in zip(cyc, np.roll(cyc, -1)):
                w[a, b] += wt
        try:
            g = validate_graph(w)
        except ValueError:
            continue
        if g.directed and check_circulation(g):
            out.append(CorpusGraph(f"circ{m}-{len(out):02d}", g, "circulation"))
    return out


def general_directed_graphs(count: int = 5, m: int = 4, rng=None) -> list[CorpusGraph]:
    rng = np.random.default_rng(rng if rng is not None else CORPUS_SEED + 2)
    out = []
    while len(out) < count:
        w = np.where(rng.random((m, m)) < 0.6, rng.uniform(0.2, 3.0, (m, m)), 0.0)
        np.fill_diagonal(w, 0.0)
        try:
            g = validate_graph(w)
        except ValueError:
            continue
        if not check_circulation(g):
            out.append(CorpusGraph(f"gen{m}-{len(out):02d}", g, "general"))
    return out


def small_graph_corpus() -> list[CorpusGraph]:
    return (
        symmetric_small_graphs()
        + random_weighted_graphs()
        + circulation_graphs()
        + general_directed_graphs()
    )
