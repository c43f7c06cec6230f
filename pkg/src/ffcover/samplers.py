"""Random spanning tree samplers.

All walk-based samplers consume a single stream of uniforms produced by
:func:`uniform_stream` and make every categorical choice by inverse CDF,
``bisect_right(cumulative, u)``.  The batch entry point
:func:`sample_trees` can therefore hand small graphs to the compiled engine
in :mod:`ffcover._engine` and get bit-identical trees.
"""

from __future__ import annotations

import bisect
import math
import time
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import NoExitEdge, NotUnweighted, StepBudgetExceeded, UnsupportedKernel, ValidationError
from .graph import (
    KernelMode,
    TransitionKernel,
    WeightedDigraph,
    build_kernel,
    root_distribution,
)
from .spectral import TransientSystem, exit_node_distribution
from .tree import SpanningTree, decode_parents, encode_parents, orient_from_root

STREAM_BLOCK = 1024
ALGOS = ("ab", "wilson", "ff", "laplacian")


def uniform_stream(rng: np.random.Generator, block: int = STREAM_BLOCK) -> Iterator[float]:
    """Endless uniforms on [0, 1) drawn from ``rng`` in blocks."""
    while True:
        yield from rng.random(block).tolist()


def _resolve_rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    if rng is None:
        return np.random.default_rng(), None
    return np.random.default_rng(int(rng)), int(rng)


@dataclass(frozen=True)
class KappaPolicy:
    """Threshold on the number of iterations since the last first entrance.

    ``fixed`` uses the constant ``value``; ``proportional`` uses
    ``ceil(value * |visited|)``.
    """

    kind: str = "fixed"
    value: float = 1000

    def __post_init__(self):
        if self.kind not in ("fixed", "proportional"):
            raise ValidationError(f"unknown kappa policy {self.kind!r}")
        if self.kind == "fixed" and not (self.value >= 1 and float(self.value).is_integer()):
            raise ValidationError("fixed kappa must be an integer >= 1")
        if self.kind == "proportional" and not self.value > 0:
            raise ValidationError("proportional kappa factor must be positive")

    @classmethod
    def fixed(cls, kappa0: int = 1000) -> "KappaPolicy":
        return cls("fixed", int(kappa0))

    @classmethod
    def proportional(cls, c: float = 2.0) -> "KappaPolicy":
        return cls("proportional", float(c))

    def threshold(self, n_visited: int) -> int:
        if self.kind == "fixed":
            return int(self.value)
        return max(1, math.ceil(self.value * n_visited))


DEFAULT_POLICY = KappaPolicy.fixed(1000)


@dataclass
class SampleStats:
    walk_steps: int = 0
    ff_count: int = 0
    wall_nanos: int = 0
    seed: int | None = None

    @property
    def iterations(self) -> int:
        """Walk-step-equivalent work: each fast-forward counts as two steps."""
        return self.walk_steps + 2 * self.ff_count


@dataclass
class VisitFrontier:
    """Mutable state of a cover walk; ``alpha`` marks the last first entrance."""

    visited: bytearray
    current: int
    alpha: int = 1
    tau: int = 1
    n_visited: int = 1
    steps_walked: int = 0
    ff_invocations: int = 0

    @classmethod
    def start(cls, m: int, root: int) -> "VisitFrontier":
        visited = bytearray(m)
        visited[root] = 1
        return cls(visited, root)

    def visited_nodes(self) -> np.ndarray:
        return np.flatnonzero(np.frombuffer(self.visited, dtype=np.uint8))

    def unvisited_nodes(self) -> np.ndarray:
        return np.flatnonzero(np.frombuffer(self.visited, dtype=np.uint8) == 0)


def _check_root(m: int, root: int) -> None:
    if not 0 <= root < m:
        raise ValidationError(f"root {root} out of range for m={m}")


# exit draws ------------------------------------------------------------------

def exit_node_cdf(kernel: TransitionKernel, visited: np.ndarray, current: int) -> np.ndarray:
    """Cumulative exit-node distribution over sorted ``visited``, last entry exactly 1."""
    probs = exit_node_distribution(TransientSystem.from_kernel(kernel, visited, current))
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    return cum


def _row_values(source, j: int, cols: np.ndarray) -> np.ndarray:
    mat = source.p if isinstance(source, TransitionKernel) else source.weights
    if hasattr(mat, "toarray"):
        return mat[j][:, cols].toarray().ravel()
    return mat[j, cols]


def exit_edge_cdf(source, j: int, unvisited: np.ndarray) -> np.ndarray:
    """Cumulative distribution of the step out of ``j`` conditioned to land in ``unvisited``."""
    vals = _row_values(source, j, unvisited)
    total = vals.sum()
    if not total > 0:
        raise NoExitEdge(f"node {j} has no edge into the unvisited set")
    cum = np.cumsum(vals) / total
    cum[-1] = 1.0
    return cum


def exit_edge_sample(source, j: int, unvisited, rng) -> int:
    """Draw ``l`` in ``unvisited`` with probability proportional to the weight of ``j -> l``.

    ``source`` may be a :class:`WeightedDigraph` or a :class:`TransitionKernel`.
    """
    rng, _ = _resolve_rng(rng)
    cand = np.sort(np.asarray(list(unvisited), dtype=np.int64))
    cum = exit_edge_cdf(source, j, cand)
    return int(cand[bisect.bisect_right(cum.tolist(), rng.random())])


# walk cores ------------------------------------------------------------------
# Each core takes a uniform iterator and returns (parent list, walk steps, ff count).

def _ab_core(kernel: TransitionKernel, root: int, u: Iterator[float], budget: int | None):
    m = kernel.m
    nbrs, cums = kernel.walk_rows
    visited = bytearray(m)
    visited[root] = 1
    parent = [-1] * m
    remaining = m - 1
    cur = root
    steps = 0
    bisect_right = bisect.bisect_right
    while remaining:
        nxt = nbrs[cur][bisect_right(cums[cur], next(u))]
        steps += 1
        if not visited[nxt]:
            visited[nxt] = 1
            parent[nxt] = cur
            remaining -= 1
        cur = nxt
        if budget is not None and steps > budget:
            raise StepBudgetExceeded(budget)
    return parent, steps, 0


def _ff_core(kernel: TransitionKernel, root: int, policy: KappaPolicy, u: Iterator[float], budget: int | None):
    m = kernel.m
    nbrs, cums = kernel.walk_rows
    fr = VisitFrontier.start(m, root)
    parent = [-1] * m
    bisect_right = bisect.bisect_right
    fixed = int(policy.value) if policy.kind == "fixed" else None
    visited = fr.visited
    cur = root
    while fr.n_visited < m:
        nxt = nbrs[cur][bisect_right(cums[cur], next(u))]
        fr.steps_walked += 1
        if not visited[nxt]:
            visited[nxt] = 1
            parent[nxt] = cur
            fr.n_visited += 1
            fr.alpha = fr.tau
            if fr.n_visited == m:
                break
        cur = nxt
        kappa = fixed if fixed is not None else policy.threshold(fr.n_visited)
        if fr.tau - fr.alpha >= kappa:
            inside = fr.visited_nodes()
            cum = exit_node_cdf(kernel, inside, cur)
            j = int(inside[bisect_right(cum.tolist(), next(u))])
            outside = fr.unvisited_nodes()
            cum = exit_edge_cdf(kernel, j, outside)
            l = int(outside[bisect_right(cum.tolist(), next(u))])
            visited[l] = 1
            parent[l] = j
            fr.n_visited += 1
            cur = l
            fr.ff_invocations += 1
            fr.alpha = fr.tau + 2
            fr.tau += 3
        else:
            fr.tau += 1
        if budget is not None and fr.steps_walked > budget:
            raise StepBudgetExceeded(budget)
    return parent, fr.steps_walked, fr.ff_invocations


def _wilson_core(kernel: TransitionKernel, root: int, u: Iterator[float], budget: int | None):
    m = kernel.m
    nbrs, cums = kernel.walk_rows
    in_tree = bytearray(m)
    in_tree[root] = 1
    nxt = [-1] * m
    steps = 0
    bisect_right = bisect.bisect_right
    for start in range(m):
        v = start
        while not in_tree[v]:
            nxt[v] = nbrs[v][bisect_right(cums[v], next(u))]
            v = nxt[v]
            steps += 1
            if budget is not None and steps > budget:
                raise StepBudgetExceeded(budget)
        v = start
        while not in_tree[v]:
            in_tree[v] = 1
            v = nxt[v]
    # loop-erased paths point towards the root; for reversible kernels the
    # same edge set read as parent links has the away-from-root law
    return nxt, steps, 0


def _require_reversible(kernel: TransitionKernel) -> None:
    if kernel.mode is not KernelMode.CIRCULATION or not kernel.is_reversible():
        raise UnsupportedKernel("Wilson's algorithm needs a reversible circulation kernel")


def _run(core, kernel, root, rng, *args):
    _check_root(kernel.m, root)
    gen, seed = _resolve_rng(rng)
    t0 = time.perf_counter_ns()
    parent, steps, ff = core(kernel, root, *args[:-1], uniform_stream(gen), args[-1])
    wall = time.perf_counter_ns() - t0
    return SpanningTree(root, np.array(parent, dtype=np.int64)), SampleStats(steps, ff, wall, seed)


def aldous_broder(kernel: TransitionKernel, root: int, rng=None, *, step_budget: int | None = None):
    """First-entrance tree of a walk started at ``root``, run until every node is visited.

    Returns ``(SpanningTree, SampleStats)``.
    """
    return _run(_ab_core, kernel, root, rng, step_budget)


def wilson(kernel: TransitionKernel, root: int, rng=None, *, step_budget: int | None = None):
    """Loop-erased random walk sampler; only for reversible circulation kernels."""
    _require_reversible(kernel)
    return _run(_wilson_core, kernel, root, rng, step_budget)


def fast_forwarded_cover(
    kernel: TransitionKernel,
    root: int,
    policy: KappaPolicy = DEFAULT_POLICY,
    rng=None,
    *,
    step_budget: int | None = None,
):
    """Cover walk that jumps straight to the next first entrance once it stalls.

    After ``policy.threshold(|visited|)`` iterations without reaching a new
    node, the last visited-set position before exit is drawn from the exact
    exit distribution and the exit edge from the kernel row restricted to
    unvisited nodes.  The tree has the same law as :func:`aldous_broder`.
    """
    return _run(_ff_core, kernel, root, rng, policy, step_budget)


# Laplacian baseline ----------------------------------------------------------

def laplacian_sampler(g: WeightedDigraph, root: int, rng=None) -> SpanningTree:
    """Uniform spanning tree by sequential edge decisions on a 0/1 symmetric graph.

    Each edge is kept with probability equal to its effective resistance in
    the current graph, which is the ratio of spanning-tree counts with and
    without the edge forced in.  ``M`` is the inverse of the Laplacian with
    the root row and column removed (stored with a zero root row/column);
    keeping an edge contracts it and dropping it deletes it, both as
    rank-one updates of ``M``.
    """
    w = g.dense()
    if g.directed or not np.all((w == 0) | (w == 1)) or np.any(np.diag(w) != 0):
        raise NotUnweighted("laplacian_sampler needs a symmetric 0/1 graph without self-loops")
    m = g.m
    _check_root(m, root)
    gen, _ = _resolve_rng(rng)
    u = uniform_stream(gen)
    lap = np.diag(w.sum(axis=1)) - w
    keep = np.arange(m) != root
    inv = np.zeros((m, m))
    inv[np.ix_(keep, keep)] = np.linalg.inv(lap[np.ix_(keep, keep)])
    chosen = []
    rows, cols = np.nonzero(np.triu(w))
    for a, b in zip(rows.tolist(), cols.tolist()):
        if len(chosen) == m - 1:
            break
        mb = inv[:, a] - inv[:, b]
        prob = min(max(mb[a] - mb[b], 0.0), 1.0)
        if next(u) < prob:
            chosen.append((a, b))
            inv -= np.outer(mb, mb) / prob
        else:
            inv += np.outer(mb, mb) / (1.0 - prob)
    return orient_from_root(m, root, chosen)


# pipeline ----------------------------------------------------------------------

def sample_tree(kernel: TransitionKernel, root: int, algo: str, policy: KappaPolicy = DEFAULT_POLICY, rng=None,
                *, step_budget: int | None = None, graph: WeightedDigraph | None = None):
    """Dispatch on ``algo`` in ``{"ab", "wilson", "ff", "laplacian"}``."""
    if algo == "ab":
        return aldous_broder(kernel, root, rng, step_budget=step_budget)
    if algo == "wilson":
        return wilson(kernel, root, rng, step_budget=step_budget)
    if algo == "ff":
        return fast_forwarded_cover(kernel, root, policy, rng, step_budget=step_budget)
    if algo == "laplacian":
        if graph is None:
            raise ValidationError("laplacian sampler needs the graph")
        gen, seed = _resolve_rng(rng)
        t0 = time.perf_counter_ns()
        tree = laplacian_sampler(graph, root, gen)
        return tree, SampleStats(0, 0, time.perf_counter_ns() - t0, seed)
    raise ValidationError(f"unknown algorithm {algo!r}")


def sample_rooted_tree(
    g: WeightedDigraph,
    root_scores=None,
    algo: str = "ff",
    policy: KappaPolicy = DEFAULT_POLICY,
    rng=None,
    *,
    kernel: TransitionKernel | None = None,
):
    """Draw ``(root, tree)`` with probability proportional to ``g_r`` times the product of edge weights.

    The kernel is chosen automatically (circulation or general forward) unless
    one is passed in.  Returns ``(root, SpanningTree, SampleStats)``.
    """
    gen, seed = _resolve_rng(rng)
    kernel = build_kernel(g) if kernel is None else kernel
    root = root_distribution(g, kernel, root_scores).sample(gen)
    tree, stats = sample_tree(kernel, root, algo, policy, gen, graph=g)
    stats.seed = seed
    return root, tree, stats


# batches ---------------------------------------------------------------------

@dataclass
class TreeBatch:
    """Many trees from one root, stored as integer parent codes."""

    m: int
    root: int
    codes: np.ndarray
    walk_steps: np.ndarray
    ff_count: np.ndarray

    def __len__(self) -> int:
        return len(self.codes)

    def tree(self, i: int) -> SpanningTree:
        return SpanningTree(self.root, decode_parents(self.codes[i], self.m))

    def trees(self) -> list[SpanningTree]:
        return [self.tree(i) for i in range(len(self))]

    def counts(self) -> dict[str, int]:
        """Occurrences per tree key."""
        uniq, cnt = np.unique(self.codes, return_counts=True)
        return {SpanningTree(self.root, decode_parents(c, self.m)).key: int(k) for c, k in zip(uniq, cnt)}


ENGINE_MAX_NODES = 10


def sample_trees(
    kernel: TransitionKernel,
    root: int,
    n: int,
    algo: str = "ff",
    policy: KappaPolicy = DEFAULT_POLICY,
    rng=None,
    *,
    engine: str = "auto",
) -> TreeBatch:
    """Draw ``n`` trees sharing one uniform stream.

    ``engine="compiled"`` runs the loop in numba with precomputed exit tables
    (``m <= 10``, algorithms ``ab`` and ``ff``); ``"python"`` uses the
    reference loops; ``"auto"`` picks the compiled engine when it applies.
    Both engines consume the uniforms identically and return the same trees.
    """
    _check_root(kernel.m, root)
    if algo not in ("ab", "ff", "wilson"):
        raise ValidationError(f"batch sampling does not support {algo!r}")
    m = kernel.m
    compiled_ok = m <= ENGINE_MAX_NODES and algo in ("ab", "ff")
    if engine == "auto":
        engine = "compiled" if compiled_ok else "python"
    gen, _ = _resolve_rng(rng)
    if engine == "compiled":
        if not compiled_ok:
            raise ValidationError("compiled engine needs m <= 10 and algo in {ab, ff}")
        from ._engine import run_batch

        codes, steps, ffs = run_batch(kernel, root, n, algo, policy, gen)
        return TreeBatch(m, root, codes, steps, ffs)
    if engine != "python":
        raise ValidationError(f"unknown engine {engine!r}")
    if algo == "wilson":
        _require_reversible(kernel)
    u = uniform_stream(gen)
    codes = np.empty(n, dtype=np.int64 if m <= 15 else object)
    steps = np.empty(n, dtype=np.int64)
    ffs = np.empty(n, dtype=np.int64)
    for i in range(n):
        if algo == "ab":
            parent, steps[i], ffs[i] = _ab_core(kernel, root, u, None)
        elif algo == "ff":
            parent, steps[i], ffs[i] = _ff_core(kernel, root, policy, u, None)
        else:
            parent, steps[i], ffs[i] = _wilson_core(kernel, root, u, None)
        codes[i] = encode_parents(parent, m)
    return TreeBatch(m, root, codes, steps, ffs)
