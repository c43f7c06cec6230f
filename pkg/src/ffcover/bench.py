"""Experiment runner, record I/O and the oracle-check driver.

Experiments are declared in an INI file, one section per experiment::

    [experiment two_block_z001]
    generator = two_block      ; two_block | k_block | scaling
    m = 200
    zeta = 0.01                ; two_block only
    k = 4                      ; k_block only
    scheme = weighted          ; two_block: weighted | unweighted
    algos = ab, ff
    replicates = 10
    seed = 7
    kappa0 = 1000              ; or kappa_prop = 2.0
    step_budget = 50000000     ; optional

Each experiment draws one graph from ``(seed, "graph")`` and every
``(replicate, algo)`` pair gets its own 64-bit seed spawned from the master
seed, so reruns are bit-for-bit identical and replicates can run in a
process pool.
"""

from __future__ import annotations

import configparser
import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .corpus import CorpusGraph, small_graph_corpus
from .errors import FFCoverError, UnsupportedKernel, ValidationError
from .generators import DESK_SCALING_SIZES, SCALING_SIZES, gen_k_block, gen_scaling, gen_two_block
from .graph import WeightedDigraph, build_kernel, validate_graph
from .oracle import GOF_ALPHA, enumerate_rooted_trees, gof_test, two_sample_test
from .samplers import ALGOS, KappaPolicy, sample_rooted_tree, sample_trees
from .spectral import lambda2

SCHEMA_VERSION = 1
GRAPH_STREAM = 0
REPLICATE_STREAM = 1


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    m: int
    zeta: float | None = None
    k: int | None = None
    scheme: str = "weighted"

    def __post_init__(self):
        if self.kind not in ("two_block", "k_block", "scaling"):
            raise ValidationError(f"unknown generator {self.kind!r}")
        if self.kind == "two_block" and self.zeta is None:
            raise ValidationError("two_block needs zeta")
        if self.kind == "k_block" and self.k is None:
            raise ValidationError("k_block needs k")
        if self.scheme not in ("weighted", "unweighted"):
            raise ValidationError(f"unknown scheme {self.scheme!r}")

    @property
    def graph_id(self) -> str:
        if self.kind == "two_block":
            return f"two_block-m{self.m}-z{self.zeta:g}-{self.scheme}"
        if self.kind == "k_block":
            return f"k_block-m{self.m}-k{self.k}"
        return f"scaling-m{self.m}"

    def build(self, rng) -> WeightedDigraph:
        if self.kind == "two_block":
            return gen_two_block(self.m, self.zeta, rng, weighted=self.scheme == "weighted")
        if self.kind == "k_block":
            return gen_k_block(self.m, self.k, rng)
        return gen_scaling(self.m, rng)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    generator: GeneratorSpec
    algos: tuple = ("ab", "wilson", "ff")
    replicates: int = 10
    seed: int = 0
    kappa: KappaPolicy = KappaPolicy.fixed(1000)
    step_budget: int | None = None
    outputs: str | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError("replicates must be at least 1")
        bad = [a for a in self.algos if a not in ALGOS]
        if bad:
            raise ValidationError(f"unknown algorithm {bad[0]!r}")


@dataclass
class RunRecord:
    graph_id: str
    algo: str
    replicate: int
    walk_steps: int
    ff_count: int
    wall_nanos: int
    lambda2: float
    seed: int
    root: int = -1
    status: str = "ok"
    experiment: str = ""
    schema_version: int = SCHEMA_VERSION

    @property
    def iterations(self) -> int:
        return self.walk_steps + 2 * self.ff_count


def graph_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(GRAPH_STREAM,)))


def replicate_seed(seed: int, replicate: int, algo_index: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(REPLICATE_STREAM, replicate, algo_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _one_run(args) -> RunRecord:
    cfg, g, kernel, lam2, replicate, algo = args
    seed = replicate_seed(cfg.seed, replicate, ALGOS.index(algo))
    base = dict(graph_id=cfg.generator.graph_id, algo=algo, replicate=replicate, lambda2=lam2,
                seed=seed, experiment=cfg.name)
    try:
        rng = np.random.default_rng(seed)
        if cfg.step_budget is not None and algo in ("ab", "wilson", "ff"):
            from .graph import root_distribution
            from .samplers import sample_tree

            root = root_distribution(g, kernel).sample(rng)
            _, stats = sample_tree(kernel, root, algo, cfg.kappa, rng, step_budget=cfg.step_budget)
        else:
            root, _, stats = sample_rooted_tree(g, None, algo, cfg.kappa, rng, kernel=kernel)
    except UnsupportedKernel:
        return RunRecord(walk_steps=0, ff_count=0, wall_nanos=0, status="skipped", **base)
    except FFCoverError as exc:
        return RunRecord(walk_steps=0, ff_count=0, wall_nanos=0, status=f"error:{type(exc).__name__}", **base)
    return RunRecord(walk_steps=stats.walk_steps, ff_count=stats.ff_count, wall_nanos=stats.wall_nanos,
                     root=int(root), **base)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[RunRecord]:
    """Generate the graph once and draw ``replicates`` trees per algorithm."""
    g = cfg.generator.build(graph_rng(cfg.seed))
    kernel = build_kernel(g)
    lam2 = lambda2(g, kernel).lambda2
    jobs = [(cfg, g, kernel, lam2, r, a) for a in cfg.algos for r in range(cfg.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_one_run, jobs))
    return [_one_run(job) for job in jobs]


def scaling_experiments(desk_scale: bool = False, algos=("ab", "wilson", "ff"), replicates: int = 10,
                        seed: int = 0, kappa: KappaPolicy = KappaPolicy.fixed(1000)) -> list[ExperimentConfig]:
    """One experiment per size of the scaling preset (``desk_scale`` picks the small sizes)."""
    sizes = DESK_SCALING_SIZES if desk_scale else SCALING_SIZES
    return [ExperimentConfig(f"scaling-m{m}", GeneratorSpec("scaling", m), tuple(algos), replicates, seed, kappa)
            for m in sizes]


# config files ----------------------------------------------------------------

def _policy_from(section) -> KappaPolicy:
    if "kappa_prop" in section:
        return KappaPolicy.proportional(section.getfloat("kappa_prop"))
    return KappaPolicy.fixed(section.getint("kappa0", fallback=1000))


def load_experiments(path) -> list[ExperimentConfig]:
    """Parse every ``[experiment NAME]`` section of an INI file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path, encoding="utf-8"):
        raise ValidationError(f"cannot read config {path}")
    out = []
    for title in parser.sections():
        if not title.startswith("experiment"):
            continue
        sec = parser[title]
        name = title.partition(" ")[2].strip() or title
        try:
            spec = GeneratorSpec(
                kind=sec.get("generator", "two_block"),
                m=sec.getint("m"),
                zeta=sec.getfloat("zeta") if "zeta" in sec else None,
                k=sec.getint("k") if "k" in sec else None,
                scheme=sec.get("scheme", "weighted"),
            )
            algos = tuple(a.strip() for a in sec.get("algos", "ab, wilson, ff").split(",") if a.strip())
            budget = sec.get("step_budget", "").strip()
            out.append(ExperimentConfig(
                name=name,
                generator=spec,
                algos=algos,
                replicates=sec.getint("replicates", fallback=10),
                seed=sec.getint("seed", fallback=0),
                kappa=_policy_from(sec),
                step_budget=int(budget) if budget else None,
                outputs=sec.get("outputs", None),
            ))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{path} [{title}]: {exc}") from None
    if not out:
        raise ValidationError(f"{path}: no [experiment ...] sections")
    return out


# record I/O ------------------------------------------------------------------

RECORD_FIELDS = [f.name for f in fields(RunRecord)]


def write_run_records(records, path, fmt: str = "jsonl") -> None:
    path = Path(path)
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(asdict(r)) + "\n")
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
            out.writeheader()
            for r in records:
                out.writerow(asdict(r))
    else:
        raise ValidationError(f"unknown format {fmt!r}")


def read_run_records(path) -> list[RunRecord]:
    path = Path(path)
    types = {f.name: f.type for f in fields(RunRecord)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        if path.suffix == ".csv":
            for row in csv.DictReader(fh):
                out.append(RunRecord(**{k: _coerce(types[k], v) for k, v in row.items()}))
        else:
            for line in fh:
                if line.strip():
                    out.append(RunRecord(**json.loads(line)))
    return out


def _coerce(kind: str, value: str):
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return value


# oracle check ----------------------------------------------------------------

def bridged_cliques(size: int = 4, bridge: float = 0.01) -> WeightedDigraph:
    """Two unit-weight cliques joined by one light edge."""
    m = 2 * size
    w = np.zeros((m, m))
    w[:size, :size] = 1.0
    w[size:, size:] = 1.0
    np.fill_diagonal(w, 0.0)
    w[size - 1, size] = w[size, size - 1] = bridge
    return validate_graph(w)


def select_corpus(selector: str = "all") -> list[CorpusGraph]:
    if selector == "bridged":
        return [CorpusGraph("bridged-cliques", bridged_cliques(), "bridged")]
    corpus = small_graph_corpus()
    if selector == "all":
        return corpus
    chosen = [c for c in corpus if c.family == selector or c.graph_id == selector]
    if not chosen:
        raise ValidationError(f"corpus selector {selector!r} matches nothing")
    return chosen


def oracle_check(selector: str = "all", algos=("ff",), n: int = 300_000, seeds: int = 1, seed: int = 0,
                 policy: KappaPolicy = KappaPolicy.fixed(1), root: int = 0,
                 alpha: float = GOF_ALPHA, min_pass_fraction: float = 0.99) -> tuple[list[dict], bool]:
    """Goodness-of-fit of each sampler against the enumerated tree law.

    One record per (graph, algo, seed).  A (graph, algo) pair passes when at
    least ``min_pass_fraction`` of its seeds have ``pvalue >= alpha``.  The
    ``bridged`` selector instead compares ``ab`` and ``ff`` with a
    two-sample test.  Returns ``(records, all_passed)``.
    """
    records, ok = [], True
    for cg in select_corpus(selector):
        kernel = build_kernel(cg.graph)
        if selector == "bridged":
            rngs = np.random.SeedSequence(seed).spawn(2)
            a = sample_trees(kernel, root, n, "ab", policy, np.random.default_rng(rngs[0]))
            b = sample_trees(kernel, root, n, "ff", KappaPolicy.fixed(50), np.random.default_rng(rngs[1]))
            rep = two_sample_test(a.counts(), b.counts())
            rec = rep.record(cg.graph_id, root, "ab-vs-ff")
            rec.update(seed=seed, status="pass" if rep.passed(alpha) else "fail",
                       ff_fraction=float(np.mean(b.ff_count >= 1)))
            records.append(rec)
            ok &= rep.passed(alpha)
            continue
        law = enumerate_rooted_trees(cg.graph, root)
        for algo in algos:
            passes = 0
            for s in range(seeds):
                rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(s,)))
                try:
                    batch = sample_trees(kernel, root, n, algo, policy, rng)
                except UnsupportedKernel:
                    records.append({"graph_id": cg.graph_id, "root": root, "algo": algo, "n": 0,
                                    "chi2": None, "dof": None, "pvalue": None, "tv": None,
                                    "seed": s, "status": "skipped"})
                    break
                rep = gof_test(law, batch)
                passes += rep.passed(alpha)
                rec = rep.record(cg.graph_id, root, algo)
                rec.update(seed=s, status="pass" if rep.passed(alpha) else "fail")
                records.append(rec)
            else:
                ok &= passes >= min_pass_fraction * seeds
    return records, ok


# dendrogram fitting ------------------------------------------------------------

def dendro_fit(csv_path, out_dir, *, columns=None, sampler: str = "gibbs", iters: int = 5000,
               burnin: int = 3500, thin: int = 10, seed: int = 0, log_transform: bool = False,
               standardize: bool = False, overrides: dict | None = None) -> dict:
    """Fit a dendrogram to CSV data and write the output bundle to ``out_dir``.

    Files: ``traces.jsonl`` (post-burn-in summaries per sweep), ``ess.csv``,
    ``similarity_depth{1,2,3}.csv`` and ``dendrograms.jsonl``.
    """
    from .dendrogram import ModelConfig, gibbs_run, read_data_csv, rj_run, similarity_matrix, spr_run

    data, names = read_data_csv(csv_path, columns, log_transform=log_transform,
                                standardize=standardize, min_columns=2)
    cfg = ModelConfig.default(len(data), data.shape[1], **(overrides or {}))
    if sampler == "gibbs":
        samples, diag = gibbs_run(data, cfg, iters, burnin, thin, seed)
    elif sampler == "rj":
        samples, diag = rj_run(data, cfg, iters, burnin, seed, thin=thin)
    elif sampler == "spr":
        samples, diag = spr_run(data, cfg, iters, burnin, seed, thin=thin)
    else:
        raise ValidationError(f"unknown sampler {sampler!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names_t = list(diag.traces)
    with open(out / "traces.jsonl", "w", encoding="utf-8") as fh:
        length = len(diag.traces[names_t[0]]) if names_t else 0
        for i in range(length):
            row = {"iteration": burnin + i + 1, **{k: int(diag.traces[k][i]) for k in names_t}}
            fh.write(json.dumps(row) + "\n")
    with open(out / "ess.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["trace", "ess_per_iter", "status"])
        w.writeheader()
        w.writerows(diag.table())
    if samples:
        for depth in (1, 2, 3):
            np.savetxt(out / f"similarity_depth{depth}.csv", similarity_matrix(samples, depth),
                       delimiter=",", fmt="%.6g")
    with open(out / "dendrograms.jsonl", "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(s.to_json() + "\n")
    return {"sampler": sampler, "columns": names, "n": len(data), "retained": len(samples),
            "ess_per_iter": diag.ess_per_iter, "out_dir": str(out)}
