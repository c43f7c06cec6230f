"""Rooted spanning trees stored as parent arrays."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class SpanningTree:
    """Directed spanning tree with edges ``parent[v] -> v`` pointing away from ``root``.

    ``parent[root]`` is -1.  Two trees compare equal when their parent arrays
    match; :attr:`key` is the canonical string used for counting.
    """

    root: int
    parent: np.ndarray

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        object.__setattr__(self, "parent", parent)
        if parent.ndim != 1 or not 0 <= self.root < len(parent):
            raise ValidationError("root must index into the parent array")
        if parent[self.root] != -1:
            raise ValidationError("parent[root] must be -1")

    @classmethod
    def from_edges(cls, root: int, m: int, edges) -> "SpanningTree":
        parent = np.full(m, -1, dtype=np.int64)
        for j, l in edges:
            parent[l] = j
        return cls(root, parent)

    @classmethod
    def from_key(cls, key: str) -> "SpanningTree":
        parent = np.array([int(x) for x in key.split(",")], dtype=np.int64)
        return cls(int(np.flatnonzero(parent == -1)[0]), parent)

    @property
    def m(self) -> int:
        return len(self.parent)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(p), v) for v, p in enumerate(self.parent) if p >= 0]

    @property
    def key(self) -> str:
        return ",".join(map(str, self.parent.tolist()))

    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in range(self.m)]
        for v, p in enumerate(self.parent.tolist()):
            if p >= 0:
                kids[p].append(v)
        return kids

    def depths(self) -> np.ndarray:
        """Distance from the root; raises if some node is not reachable from it."""
        depth = np.full(self.m, -1, dtype=np.int64)
        depth[self.root] = 0
        kids = self.children()
        queue = deque([self.root])
        while queue:
            j = queue.popleft()
            for l in kids[j]:
                depth[l] = depth[j] + 1
                queue.append(l)
        if np.any(depth < 0):
            raise ValidationError("parent array contains a cycle or a second root")
        return depth

    def validate(self, g=None) -> None:
        """Check the tree shape and, if a graph is given, that every edge has positive weight."""
        if np.count_nonzero(self.parent == -1) != 1:
            raise ValidationError("tree must have exactly one root")
        if np.any(self.parent >= self.m) or np.any(self.parent < -1):
            raise ValidationError("parent ids out of range")
        self.depths()
        if g is not None:
            if g.m != self.m:
                raise ValidationError("tree and graph sizes differ")
            for j, l in self.edges:
                w = g.weights[j, l]
                if not w > 0:
                    raise ValidationError(f"edge {j}->{l} has no weight in the graph")

    def log_weight(self, weights) -> float:
        """Sum of log edge weights, i.e. the log of the product of ``weights[j, l]``."""
        v = np.flatnonzero(self.parent >= 0)
        if hasattr(weights, "toarray"):
            vals = np.asarray(weights[self.parent[v], v]).ravel()
        else:
            vals = weights[self.parent[v], v]
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(vals)))

    def __eq__(self, other) -> bool:
        return isinstance(other, SpanningTree) and np.array_equal(self.parent, other.parent)

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"SpanningTree(root={self.root}, parent=[{self.key}])"


def orient_from_root(m: int, root: int, undirected_edges) -> SpanningTree:
    """Orient an undirected spanning tree away from ``root`` by breadth-first search."""
    adj: list[list[int]] = [[] for _ in range(m)]
    for a, b in undirected_edges:
        adj[a].append(b)
        adj[b].append(a)
    parent = np.full(m, -1, dtype=np.int64)
    seen = np.zeros(m, dtype=bool)
    seen[root] = True
    queue = deque([root])
    while queue:
        j = queue.popleft()
        for l in adj[j]:
            if not seen[l]:
                seen[l] = True
                parent[l] = j
                queue.append(l)
    if not seen.all():
        raise ValidationError("edge set does not span the graph")
    return SpanningTree(root, parent)


def encode_parents(parent, m: int) -> int:
    """Integer code ``sum_v (parent[v] + 1) * (m + 1)**v`` used by the batch engines."""
    code = 0
    base = 1
    for p in parent:
        code += (int(p) + 1) * base
        base *= m + 1
    return code


def decode_parents(code: int, m: int) -> np.ndarray:
    parent = np.empty(m, dtype=np.int64)
    code = int(code)
    for v in range(m):
        code, digit = divmod(code, m + 1)
        parent[v] = digit - 1
    return parent
