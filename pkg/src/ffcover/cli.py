"""Command-line front end.

Subcommands: ``sample``, ``bench``, ``oracle-check`` and ``dendro``.  Exit
codes: 0 success, 1 numerical failure, 2 validation failure, 3 statistical
test failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import (
    dendro_fit,
    load_experiments,
    oracle_check,
    run_experiment,
    scaling_experiments,
    write_run_records,
)
from .errors import FFCoverError, ValidationError
from .graph import read_edge_list
from .oracle import write_records
from .samplers import ALGOS, KappaPolicy, sample_rooted_tree

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_VALIDATION = 2
EXIT_STATISTICAL = 3

log = logging.getLogger("ffcover")


def _policy(args, default_kappa0: int = 1000) -> KappaPolicy:
    if args.kappa_prop is not None:
        return KappaPolicy.proportional(args.kappa_prop)
    return KappaPolicy.fixed(args.kappa0 if args.kappa0 is not None else default_kappa0)


def _add_kappa(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--kappa0", type=int, help="fixed fast-forward threshold")
    group.add_argument("--kappa-prop", type=float, help="threshold proportional to the visited count")


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sample(args) -> int:
    g = read_edge_list(args.graph, symmetrize=args.symmetrize)
    scores = None
    if args.root is not None:
        if not 0 <= args.root < g.m:
            raise ValidationError(f"root {args.root} out of range for {g.m} nodes")
        scores = np.zeros(g.m)
        scores[args.root] = 1.0
    root, tree, stats = sample_rooted_tree(g, scores, args.algo, _policy(args), args.seed)
    rec = {"graph": str(args.graph), "algo": args.algo, "root": int(root), "parent": tree.parent.tolist(),
           "walk_steps": stats.walk_steps, "ff_count": stats.ff_count, "wall_nanos": stats.wall_nanos,
           "seed": args.seed}
    out = _out_dir(args)
    if out is None:
        print(json.dumps(rec))
    elif args.format == "csv":
        with open(out / "tree.csv", "w", encoding="utf-8") as fh:
            fh.write("node,parent\n")
            fh.writelines(f"{v},{p}\n" for v, p in enumerate(tree.parent.tolist()))
    else:
        with open(out / "tree.jsonl", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(rec) + "\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.config is not None:
        configs = load_experiments(args.config)
    elif args.scaling or args.desk_scale:
        configs = scaling_experiments(args.desk_scale, seed=args.seed or 0, kappa=_policy(args))
    else:
        raise ValidationError("bench needs a config file, --scaling or --desk-scale")
    out = _out_dir(args) or Path(".")
    for cfg in configs:
        records = run_experiment(cfg, workers=args.workers)
        path = Path(cfg.outputs) if cfg.outputs else out / f"{cfg.name}.{args.format}"
        write_run_records(records, path, args.format)
        failed = sum(r.status.startswith("error") for r in records)
        log.info("%s: %d records (%d failed) -> %s", cfg.name, len(records), failed, path)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    algos = tuple(args.algo) if args.algo else ("ff",)
    records, ok = oracle_check(args.corpus, algos, n=args.n, seeds=args.seeds, seed=args.seed or 0,
                               policy=_policy(args, default_kappa0=1), root=args.root)
    out = _out_dir(args)
    if out is not None:
        write_records(records, out / "oracle.jsonl")
    for rec in records:
        if rec["status"] == "fail":
            log.warning("fail: %s", json.dumps(rec))
    n_fail = sum(r["status"] == "fail" for r in records)
    print(f"{len(records)} reports, {n_fail} failing, policy {'passed' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_STATISTICAL


def cmd_dendro(args) -> int:
    overrides = {}
    for key in ("m_tilde", "lam", "nu", "alpha_dir"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if args.kappa0 is not None or args.kappa_prop is not None:
        overrides["kappa"] = _policy(args)
    columns = args.columns.split(",") if args.columns else None
    summary = dendro_fit(args.data, args.out or "dendro_out", columns=columns, sampler=args.sampler,
                         iters=args.iters, burnin=args.burnin, thin=args.thin, seed=args.seed or 0,
                         log_transform=args.log_transform, standardize=args.standardize, overrides=overrides)
    print(json.dumps(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ffcover", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("sample", parents=[common], help="draw one rooted spanning tree from a TSV graph")
    p.add_argument("graph", help="edge list with header src<TAB>dst<TAB>weight")
    p.add_argument("--algo", choices=ALGOS, default="ff")
    p.add_argument("--root", type=int, default=None, help="fix the root instead of sampling it")
    p.add_argument("--symmetrize", action="store_true")
    _add_kappa(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("bench", parents=[common], help="run experiments from an INI config")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--scaling", action="store_true", help="scaling preset (500..1000 nodes)")
    p.add_argument("--desk-scale", action="store_true", help="small scaling preset (100..200 nodes)")
    p.add_argument("--workers", type=int, default=1)
    _add_kappa(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check", parents=[common], help="goodness-of-fit against exact enumeration")
    p.add_argument("--corpus", default="all",
                   help="all | symmetric | weighted | circulation | general | bridged | graph id")
    p.add_argument("--algo", choices=ALGOS[:3], action="append")
    p.add_argument("--n", type=int, default=300_000)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--root", type=int, default=0)
    _add_kappa(p)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("dendro", parents=[common], help="fit a dendrogram to CSV data")
    p.add_argument("data")
    p.add_argument("--columns", default=None, help="comma-separated column names")
    p.add_argument("--sampler", choices=("gibbs", "rj", "spr"), default="gibbs")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--burnin", type=int, default=3500)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--log-transform", action="store_true")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--m-tilde", dest="m_tilde", type=int, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--alpha-dir", dest="alpha_dir", type=float, default=None)
    _add_kappa(p)
    p.set_defaults(func=cmd_dendro)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FFCoverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
