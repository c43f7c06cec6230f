import json
from dataclasses import replace

import numpy as np
import pytest

from ffcover import cli
from ffcover.bench import (
    ExperimentConfig,
    GeneratorSpec,
    dendro_fit,
    load_experiments,
    oracle_check,
    read_run_records,
    replicate_seed,
    run_experiment,
    write_run_records,
)
from ffcover.errors import ValidationError
from ffcover.samplers import KappaPolicy

SMALL = ExperimentConfig("small", GeneratorSpec("two_block", 20, zeta=0.2), ("ab", "wilson", "ff"), 3, 11,
                         KappaPolicy.fixed(50))


def _strip(records):
    return [replace(r, wall_nanos=0) for r in records]


class TestExperiments:
    def test_record_count_and_fields(self):
        recs = run_experiment(SMALL)
        assert len(recs) == 9
        assert {r.algo for r in recs} == {"ab", "wilson", "ff"}
        assert all(r.status == "ok" and r.lambda2 > 0 and r.schema_version == 1 for r in recs)

    def test_deterministic(self):
        assert _strip(run_experiment(SMALL)) == _strip(run_experiment(SMALL))

    def test_pool_matches_serial(self):
        assert _strip(run_experiment(SMALL, workers=2)) == _strip(run_experiment(SMALL))

    def test_distinct_seeds(self):
        seeds = {replicate_seed(1, r, a) for r in range(10) for a in range(3)}
        assert len(seeds) == 30

    def test_ff_fires_on_bottleneck(self):
        cfg = ExperimentConfig("tb", GeneratorSpec("two_block", 200, zeta=0.01), ("ff",), 10, 3)
        recs = run_experiment(cfg)
        assert sum(r.ff_count >= 1 for r in recs) >= 9

    def test_budget_failure_recorded(self):
        cfg = replace(SMALL, algos=("ab",), step_budget=5)
        recs = run_experiment(cfg)
        assert all(r.status == "error:StepBudgetExceeded" for r in recs)

    def test_invalid_configs(self):
        with pytest.raises(ValidationError):
            ExperimentConfig("x", GeneratorSpec("two_block", 10, zeta=0.1), replicates=0)
        with pytest.raises(ValidationError):
            GeneratorSpec("two_block", 10)
        with pytest.raises(ValidationError):
            ExperimentConfig("x", GeneratorSpec("scaling", 10), algos=("nope",))


class TestRecords:
    @pytest.mark.parametrize("fmt", ["jsonl", "csv"])
    def test_round_trip(self, tmp_path, fmt):
        recs = run_experiment(SMALL)
        path = tmp_path / f"r.{fmt}"
        write_run_records(recs, path, fmt)
        assert read_run_records(path) == recs

    def test_jsonl_lines_are_json(self, tmp_path):
        path = tmp_path / "r.jsonl"
        write_run_records(run_experiment(SMALL), path)
        for line in path.read_text().splitlines():
            assert json.loads(line)["schema_version"] == 1


class TestConfigFile:
    def test_parse(self, tmp_path):
        path = tmp_path / "b.ini"
        path.write_text("[experiment a]\ngenerator = k_block\nm = 40\nk = 4\nalgos = ab, ff\n"
                        "replicates = 2\nseed = 5\nkappa_prop = 2.0\n\n"
                        "[experiment b]\ngenerator = two_block\nm = 10\nzeta = 0.5 ; comment\n")
        a, b = load_experiments(path)
        assert a.name == "a" and a.generator.k == 4 and a.algos == ("ab", "ff")
        assert a.kappa == KappaPolicy.proportional(2.0)
        assert b.generator.zeta == 0.5 and b.kappa == KappaPolicy.fixed(1000)

    def test_errors(self, tmp_path):
        path = tmp_path / "b.ini"
        path.write_text("[experiment a]\ngenerator = two_block\nm = 10\n")
        with pytest.raises(ValidationError):
            load_experiments(path)
        path.write_text("[other]\nx = 1\n")
        with pytest.raises(ValidationError):
            load_experiments(path)


class TestOracleCheck:
    def test_general_corpus_skips_wilson(self):
        records, ok = oracle_check("general", ("ff", "wilson"), n=20_000)
        assert ok
        skipped = [r for r in records if r["algo"] == "wilson"]
        assert skipped and all(r["status"] == "skipped" for r in skipped)

    def test_bridged(self):
        records, ok = oracle_check("bridged", n=100_000, seed=4)
        assert ok and records[0]["algo"] == "ab-vs-ff"

    def test_unknown_selector(self):
        with pytest.raises(ValidationError):
            oracle_check("nothing")


class TestDendroFit:
    def test_bundle(self, tmp_path):
        rng = np.random.default_rng(0)
        y = np.vstack([rng.normal(-2, 0.5, (15, 2)), rng.normal(2, 0.5, (15, 2))])
        csv_path = tmp_path / "d.csv"
        np.savetxt(csv_path, y, delimiter=",", header="x,y", comments="")
        out = tmp_path / "out"
        summary = dendro_fit(csv_path, out, sampler="gibbs", iters=50, burnin=20, thin=10, standardize=True)
        assert summary["retained"] == 3
        names = {p.name for p in out.iterdir()}
        assert names == {"traces.jsonl", "ess.csv", "dendrograms.jsonl", "similarity_depth1.csv",
                         "similarity_depth2.csv", "similarity_depth3.csv"}
        assert np.loadtxt(out / "similarity_depth1.csv", delimiter=",").shape == (30, 30)
        assert len((out / "traces.jsonl").read_text().splitlines()) == 30
        rj = dendro_fit(csv_path, tmp_path / "rj", sampler="rj", iters=50, burnin=20, thin=10)
        assert rj["retained"] == 3 and set(rj["ess_per_iter"]) == set(summary["ess_per_iter"])

    def test_needs_two_columns(self, tmp_path):
        csv_path = tmp_path / "d.csv"
        csv_path.write_text("x\n1\n2\n")
        with pytest.raises(ValidationError):
            dendro_fit(csv_path, tmp_path / "o")


class TestCli:
    def _graph(self, tmp_path):
        path = tmp_path / "g.tsv"
        path.write_text("src\tdst\tweight\n0\t1\t1\n1\t2\t1\n2\t0\t1\n")
        return path

    def test_sample(self, tmp_path, capsys):
        assert cli.main(["sample", str(self._graph(tmp_path)), "--seed", "3", "--symmetrize"]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert len(rec["parent"]) == 3 and rec["parent"][rec["root"]] == -1

    def test_sample_to_dir(self, tmp_path):
        out = tmp_path / "o"
        code = cli.main(["sample", str(self._graph(tmp_path)), "--algo", "ab", "--root", "1",
                         "--out", str(out), "--format", "csv"])
        assert code == 0
        assert (out / "tree.csv").read_text().splitlines()[0] == "node,parent"

    def test_validation_exit(self, tmp_path):
        assert cli.main(["sample", str(self._graph(tmp_path)), "--algo", "wilson"]) == 2
        assert cli.main(["sample", str(tmp_path / "missing.tsv")]) == 2

    def test_bad_flag(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["sample", "x.tsv", "--algo", "nope"])
        assert err.value.code == 2

    def test_oracle_check_failure_exit(self, monkeypatch):
        monkeypatch.setattr(cli, "oracle_check", lambda *a, **k: ([{"status": "fail"}], False))
        assert cli.main(["oracle-check", "--corpus", "general"]) == 3

    def test_oracle_check_pass(self, tmp_path):
        code = cli.main(["oracle-check", "--corpus", "circulation", "--n", "20000", "--out", str(tmp_path)])
        assert code == 0 and (tmp_path / "oracle.jsonl").exists()

    def test_bench(self, tmp_path):
        cfg = tmp_path / "b.ini"
        cfg.write_text("[experiment tiny]\ngenerator = two_block\nm = 10\nzeta = 0.5\nreplicates = 2\n")
        assert cli.main(["bench", str(cfg), "--out", str(tmp_path), "--format", "csv"]) == 0
        assert len(read_run_records(tmp_path / "tiny.csv")) == 6
        assert cli.main(["bench"]) == 2

    def test_dendro(self, tmp_path, capsys):
        csv_path = tmp_path / "d.csv"
        rng = np.random.default_rng(1)
        np.savetxt(csv_path, rng.normal(size=(16, 2)) + 3, delimiter=",", header="a,b", comments="")
        code = cli.main(["dendro", str(csv_path), "--sampler", "spr", "--iters", "30", "--burnin", "10",
                         "--thin", "5", "--log-transform", "--standardize", "--out", str(tmp_path / "o")])
        assert code == 0 and json.loads(capsys.readouterr().out)["retained"] == 4
        assert cli.main(["dendro", str(csv_path), "--columns", "a,zz", "--out", str(tmp_path / "o2")]) == 2
