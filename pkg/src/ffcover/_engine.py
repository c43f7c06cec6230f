"""Compiled batch loop for small graphs (m <= 10).

Every visited set is a bitmask, so the exit-node and exit-edge cumulative
distributions can be tabulated once per graph with the same helpers the
Python sampler uses.  The compiled loop then replays the Python control
flow on a flat array of uniforms.  When the array runs out mid-tree the loop
reports where that tree started; the driver refills and the tree is redrawn
from the same uniforms, so output does not depend on buffer sizes.
"""

from __future__ import annotations

import weakref

import numba
import numpy as np

from .errors import NoExitEdge
from .graph import TransitionKernel

_CHUNK = 1 << 16
# exit tables per kernel and root, reused across batches on the same kernel
_TABLES: "weakref.WeakKeyDictionary[TransitionKernel, dict]" = weakref.WeakKeyDictionary()


def _walk_tables(kernel: TransitionKernel):
    nbrs, cums = kernel.walk_rows
    m = kernel.m
    width = max(len(r) for r in nbrs)
    nbr = np.zeros((m, width), dtype=np.int64)
    cum = np.ones((m, width), dtype=np.float64)
    deg = np.zeros(m, dtype=np.int64)
    for j in range(m):
        deg[j] = len(nbrs[j])
        nbr[j, : deg[j]] = nbrs[j]
        cum[j, : deg[j]] = cums[j]
    return nbr, cum, deg


def _exit_tables(kernel: TransitionKernel, root: int):
    from .samplers import exit_edge_cdf, exit_node_cdf

    m = kernel.m
    node_cdf = np.ones((1 << m, m, m))
    edge_cdf = np.ones((1 << m, m, m))
    full = (1 << m) - 1
    for mask in range(1 << m):
        if not mask >> root & 1 or mask == full:
            continue
        inside = np.array([v for v in range(m) if mask >> v & 1], dtype=np.int64)
        outside = np.array([v for v in range(m) if not mask >> v & 1], dtype=np.int64)
        for cur in inside:
            node_cdf[mask, cur, : len(inside)] = exit_node_cdf(kernel, inside, int(cur))
            try:
                edge_cdf[mask, cur, : len(outside)] = exit_edge_cdf(kernel, int(cur), outside)
            except NoExitEdge:
                pass  # such a node never has positive exit probability
    return node_cdf, edge_cdf


@numba.njit(cache=True)
def _pick(row, length, x):
    k = 0
    while k < length - 1 and row[k] <= x:
        k += 1
    return k


@numba.njit(cache=True)
def _nth_bit(mask, k, want_set):
    v = 0
    while True:
        if ((mask >> v) & 1) == want_set:
            if k == 0:
                return v
            k -= 1
        v += 1


@numba.njit(cache=True)
def _batch(start, n, m, root, use_ff, kappa_fixed, kappa_factor,
           nbr, cum, deg, node_cdf, edge_cdf, u, pos, codes, steps, ffs):
    nu = u.shape[0]
    parent = np.empty(m, dtype=np.int64)
    i = start
    while i < n:
        pos0 = pos
        parent[:] = -1
        mask = 1 << root
        count = 1
        cur = root
        alpha = 1
        tau = 1
        nsteps = 0
        nff = 0
        while count < m:
            if pos >= nu:
                return i, pos0
            nxt = nbr[cur, _pick(cum[cur], deg[cur], u[pos])]
            pos += 1
            nsteps += 1
            if not (mask >> nxt) & 1:
                mask |= 1 << nxt
                parent[nxt] = cur
                count += 1
                alpha = tau
                if count == m:
                    break
            cur = nxt
            if not use_ff:
                continue
            if kappa_factor > 0:
                kappa = max(1, int(np.ceil(kappa_factor * count)))
            else:
                kappa = kappa_fixed
            if tau - alpha >= kappa:
                if pos + 1 >= nu:
                    return i, pos0
                j = _nth_bit(mask, _pick(node_cdf[mask, cur], count, u[pos]), 1)
                l = _nth_bit(mask, _pick(edge_cdf[mask, j], m - count, u[pos + 1]), 0)
                pos += 2
                mask |= 1 << l
                parent[l] = j
                count += 1
                cur = l
                nff += 1
                alpha = tau + 2
                tau += 3
            else:
                tau += 1
        code = 0
        base = 1
        for v in range(m):
            code += (parent[v] + 1) * base
            base *= m + 1
        codes[i] = code
        steps[i] = nsteps
        ffs[i] = nff
        i += 1
    return n, pos


def run_batch(kernel: TransitionKernel, root: int, n: int, algo: str, policy, rng: np.random.Generator):
    """Draw ``n`` trees; returns ``(codes, walk_steps, ff_counts)`` arrays."""
    m = kernel.m
    use_ff = algo == "ff"
    nbr, cum, deg = _walk_tables(kernel)
    if use_ff:
        per_root = _TABLES.setdefault(kernel, {})
        if root not in per_root:
            per_root[root] = _exit_tables(kernel, root)
        node_cdf, edge_cdf = per_root[root]
    else:
        node_cdf = edge_cdf = np.ones((1, 1, 1))
    kappa_fixed = int(policy.value) if policy.kind == "fixed" else 0
    kappa_factor = float(policy.value) if policy.kind == "proportional" else 0.0
    codes = np.empty(n, dtype=np.int64)
    steps = np.empty(n, dtype=np.int64)
    ffs = np.empty(n, dtype=np.int64)
    chunk = _CHUNK
    buf = rng.random(chunk)
    done = 0
    while True:
        done, pos = _batch(done, n, m, root, use_ff, kappa_fixed, kappa_factor,
                           nbr, cum, deg, node_cdf, edge_cdf, buf, 0, codes, steps, ffs)
        if done == n:
            return codes, steps, ffs
        if pos == 0:
            chunk *= 2  # a single tree needed more uniforms than the buffer held
        buf = np.concatenate([buf[pos:], rng.random(chunk)])
