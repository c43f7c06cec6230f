"""Trace summaries, autocorrelation and effective sample size."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError, ZeroVariance

TRACE_NAMES = ("max_degree", "max_depth", "n_leaves")
MIN_TRACE = 10


def tree_summaries(dendro) -> dict:
    """Maximum (undirected) degree, maximum depth and number of non-empty leaves."""
    kids = dendro.children()
    deg = {v: len(kids[v]) + (dendro.parent[v] >= 0) for v in dendro.parent}
    depth = dendro.depths()
    leaves = sum(1 for v in dendro.parent if not kids[v] and dendro.counts[v] > 0)
    return {
        "max_degree": max(deg.values()),
        "max_depth": max(depth.values()),
        "n_leaves": leaves,
        "n_nodes": len(dendro.parent),
    }


def acf(trace, max_lag: int | None = None) -> np.ndarray:
    """Sample autocorrelation via FFT; ``acf[0] == 1``."""
    x = np.asarray(trace, dtype=float)
    n = len(x)
    x = x - x.mean()
    var = x @ x
    if var == 0:
        raise ZeroVariance("trace is constant")
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    r = np.fft.irfft(f * np.conj(f), size)[:n] / var
    return r if max_lag is None else r[: max_lag + 1]


def ess(trace) -> float:
    """Effective sample size with Geyer's initial positive sequence truncation.

    ``N / tau`` with ``tau = -1 + 2 * sum_k (rho_2k + rho_2k+1)``, summing
    pairs while they stay positive.
    """
    x = np.asarray(trace, dtype=float)
    n = len(x)
    if n < MIN_TRACE:
        raise ValidationError(f"trace needs at least {MIN_TRACE} points")
    rho = acf(x)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(n / tau)


@dataclass
class ChainDiagnostics:
    """Per-trace autocorrelations and effective sample size per iteration.

    ``status`` is ``"ok"``, ``"zero_variance"`` (constant trace, scored as a
    single effective draw) or ``"too_short"``.
    """

    traces: dict = field(default_factory=dict)
    acf: dict = field(default_factory=dict)
    ess_per_iter: dict = field(default_factory=dict)
    status: dict = field(default_factory=dict)
    wall_nanos: int = 0

    @classmethod
    def from_traces(cls, traces: dict, max_lag: int = 100, wall_nanos: int = 0) -> "ChainDiagnostics":
        out = cls(wall_nanos=wall_nanos)
        for name, values in traces.items():
            x = np.asarray(values, dtype=float)
            out.traces[name] = x
            n = len(x)
            if n < MIN_TRACE:
                out.status[name] = "too_short"
                out.ess_per_iter[name] = float("nan")
                out.acf[name] = np.ones(1)
                continue
            try:
                out.acf[name] = acf(x, max_lag)
                out.ess_per_iter[name] = min(1.0, ess(x) / n)
                out.status[name] = "ok"
            except ZeroVariance:
                out.acf[name] = np.ones(1)
                out.ess_per_iter[name] = 1.0 / n
                out.status[name] = "zero_variance"
        return out

    @classmethod
    def from_rows(cls, rows: list[dict], **kw) -> "ChainDiagnostics":
        names = rows[0].keys() if rows else TRACE_NAMES
        return cls.from_traces({k: [r[k] for r in rows] for k in names}, **kw)

    def table(self) -> list[dict]:
        return [{"trace": k, "ess_per_iter": self.ess_per_iter[k], "status": self.status[k]}
                for k in self.traces]
