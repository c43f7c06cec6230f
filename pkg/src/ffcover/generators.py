"""Block-structured random graphs with tunable bottlenecks.

Weights are ``w = u * b`` (times ``c`` across blocks for the K-block family)
with ``u ~ Unif(0, 1)`` drawn once per unordered pair, so every graph is
symmetric.  Draws that come out disconnected are regenerated.
"""

from __future__ import annotations

import numpy as np

from .errors import GenerationFailed, ValidationError
from .graph import WeightedDigraph, validate_graph

MAX_ATTEMPTS = 100


def _symmetric_pairs(values: np.ndarray) -> np.ndarray:
    w = np.triu(values, 1)
    return w + w.T


def _retry(build, rng, what: str) -> WeightedDigraph:
    for attempt in range(1, MAX_ATTEMPTS + 1):
        try:
            g = validate_graph(build(rng))
        except ValidationError:
            continue
        g.info.update(generator=what, attempts=attempt)
        return g
    raise GenerationFailed(f"{what}: no connected draw in {MAX_ATTEMPTS} attempts")


def block_labels(m: int, k: int) -> np.ndarray:
    return np.repeat(np.arange(k), m // k)


def gen_two_block(m: int, zeta: float, rng=None, *, weighted: bool = True) -> WeightedDigraph:
    """Two equal blocks: dense inside, sparse ``Bern(zeta)`` links across.

    Weighted scheme: within-block weight ``u * (m/2)**2``, cross-block
    ``u * Bern(zeta)``.  Unweighted scheme: 1 within, ``Bern(zeta)`` across.
    """
    if m < 2 or m % 2:
        raise ValidationError("m must be even and at least 2")
    if not 0 < zeta <= 1:
        raise ValidationError("zeta must lie in (0, 1]")
    rng = np.random.default_rng(rng)
    same = block_labels(m, 2)[:, None] == block_labels(m, 2)[None, :]
    inner = (m // 2) ** 2 if weighted else 1.0

    def build(rng):
        u = rng.random((m, m)) if weighted else np.ones((m, m))
        cross = rng.random((m, m)) < zeta
        b = np.where(same, inner, cross.astype(float))
        return _symmetric_pairs(u * b)

    return _retry(build, rng, f"two_block(m={m}, zeta={zeta}, weighted={weighted})")


def gen_k_block(m: int, k: int, rng=None, *, cross_prob: float = 0.001, inner_weight: float = 1.0) -> WeightedDigraph:
    """``k`` equal blocks; across blocks ``u * Bern(cross_prob) * 0.005 / k``.

    Within-block weights are ``u * inner_weight``.  Keeping ``inner_weight``
    independent of ``k`` makes the ``1/k`` cross factor hold ``1/sqrt(lambda2)``
    roughly constant as ``k`` varies (about 400 to 550 at ``m = 600``).
    """
    if k < 1 or m < 2 or m % k:
        raise ValidationError("k must divide m and m must be at least 2")
    rng = np.random.default_rng(rng)
    labels = block_labels(m, k)
    same = labels[:, None] == labels[None, :]
    inner = inner_weight
    scale = 0.005 / k

    def build(rng):
        u = rng.random((m, m))
        cross = (rng.random((m, m)) < cross_prob) * scale
        return _symmetric_pairs(u * np.where(same, inner, cross))

    return _retry(build, rng, f"k_block(m={m}, k={k})")


def gen_scaling(m: int, rng=None, zeta: float = 0.1) -> WeightedDigraph:
    """Two-block graph with ``Bern(0.1)`` cross links, used for the size sweep."""
    return gen_two_block(m, zeta, rng)


SCALING_SIZES = (500, 600, 800, 1000)
DESK_SCALING_SIZES = (100, 120, 160, 200)
