import json
import subprocess
import sys

import numpy as np
import pytest

from invprobit.cli import RunConfig, build_parser, main
from invprobit.errors import ConfigError
from invprobit.io import read_samples


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    assert main(["simulate", "--seed", "3", "--out", str(root), "--n", "2", "--T", "2", "--L", "3"]) == 0
    return root


def fit_args(toy, out, *extra):
    return ["fit", str(toy / "dataset.csv"), "--seed", "1", "--out", str(out), "--n-iter", "50", "--burn-in", "10",
            "--M-prob", "50", *extra]


class TestSimulate:
    def test_byte_identical(self, tmp_path):
        # default clusters and subjects; T reduced to keep the truth quadrature cheap
        for d in ("a", "b"):
            assert main(["simulate", "--default-design", "--seed", "7", "--out", str(tmp_path / d), "--T", "3"]) == 0
        for name in ("dataset.csv", "truth.csv", "truth_clusters.csv", "design.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_outputs(self, toy):
        meta = json.loads((toy / "design.json").read_text())
        assert (meta["n"], meta["T"], meta["L_per_stimulus"], meta["d0"]) == (2, 2, 3, 4)
        lines = (toy / "dataset.csv").read_text().splitlines()
        assert lines[0] == "subject,block,trial,stimulus,response"
        assert len(lines) - 1 == 2 * 2 * 4 * 3

    def test_seed_required(self, tmp_path, capsys):
        assert main(["simulate", "--out", str(tmp_path)]) == 2
        assert "--seed" in capsys.readouterr().err


class TestFit:
    def test_smoke_and_pipeline(self, toy, tmp_path):
        out = tmp_path / "fit"
        assert main(fit_args(toy, out)) == 0
        s = read_samples(out)
        assert len(s) == 8 and s.config.seed == 1
        assert main(["summarize", str(out), "--dataset", str(toy / "dataset.csv")]) == 0
        assert (out / "summary" / "prob_population.csv").exists()
        assert main(["validate", str(out), "--truth", str(toy / "truth.csv"), "--out", str(tmp_path / "v.json")]) == 0
        rep = json.loads((tmp_path / "v.json").read_text())
        assert {"mse", "rand_index", "adjusted_rand_index", "coverage"} <= set(rep)
        assert main(["diagnose", str(out), "--params", "variances"]) == 2  # 8 draws is too short for Geweke

    def test_deterministic(self, toy, tmp_path):
        assert main(fit_args(toy, tmp_path / "a")) == 0
        assert main(fit_args(toy, tmp_path / "b", "--workers", "2")) == 0
        for name in ("labels.csv", "drifts.csv", "probs.csv", "variances.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_chains(self, toy, tmp_path):
        out = tmp_path / "multi"
        assert main(fit_args(toy, out, "--chains", "2", "--n-iter", "120")) == 0
        a, b = read_samples(out / "chain_1"), read_samples(out / "chain_2")
        assert (a.config.seed, b.config.seed) == (1, 2)
        assert main(["diagnose", str(out / "chain_1"), str(out / "chain_2"), "--out", str(out)]) == 0
        header = (out / "geweke.csv").read_text().splitlines()[0]
        assert header == "chain,parameter,z,p,ess"

    def test_config_file_and_precedence(self, toy, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"dataset = {toy / 'dataset.csv'}\nout = {tmp_path / 'cfgfit'}\nn-iter = 30\nburn_in = 10\nthin = 10\n")
        assert main(["fit", "--seed", "2", "--config", str(cfg), "--thin", "5", "--M-prob", "20"]) == 0
        s = read_samples(tmp_path / "cfgfit")
        assert (s.config.n_iter, s.config.thin, len(s)) == (30, 5, 4)

    def test_missing_dataset(self, tmp_path, capsys):
        assert main(["fit", str(tmp_path / "nope.csv"), "--seed", "1", "--out", str(tmp_path)]) == 2
        assert "not found" in capsys.readouterr().err

    def test_invalid_config(self, toy, tmp_path):
        assert main(fit_args(toy, tmp_path / "x", "--thin", "0")) == 2

    def test_integrity(self, toy, tmp_path):
        out = tmp_path / "fit"
        assert main(fit_args(toy, out)) == 0
        other = tmp_path / "other"
        assert main(["simulate", "--seed", "4", "--out", str(other), "--n", "2", "--T", "2", "--L", "3"]) == 0
        assert main(["summarize", str(out), "--dataset", str(other / "dataset.csv")]) == 2


class TestUsage:
    def test_unknown_flag(self, capsys):
        assert main(["fit", "--bogus"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_no_command(self):
        assert main([]) == 2

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert "invprobit" in capsys.readouterr().out

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "invprobit", "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "simulate" in r.stdout

    def test_parser_covers_config_fields(self):
        from dataclasses import fields

        from invprobit.sampler import McmcConfig

        fp = build_parser()._subparsers._group_actions[0].choices["fit"]
        dests = {a.dest for a in fp._actions}
        assert {f.name for f in fields(McmcConfig)} - {"seed"} <= dests


class TestRunConfig:
    def test_unknown_key(self, toy):
        with pytest.raises(ConfigError, match="unknown"):
            RunConfig.from_sources({"dataset": str(toy / "dataset.csv"), "out": "x", "colour": "red"}, {})

    def test_bad_value(self, toy):
        with pytest.raises(ConfigError):
            RunConfig.from_sources({"dataset": str(toy / "dataset.csv"), "out": "x", "thin": "2.5"}, {})

    def test_level(self, toy):
        with pytest.raises(ConfigError):
            RunConfig.from_sources({"dataset": str(toy / "dataset.csv"), "out": "x", "level": "1.2"}, {})

    def test_chain_seeds(self, toy):
        rc = RunConfig.from_sources({"dataset": str(toy / "dataset.csv"), "out": "x", "chains": "3", "seed": "10"}, {})
        assert [c.seed for c in rc.chain_configs()] == [10, 11, 12]
        assert [p.name for p in rc.chain_dirs()] == ["chain_1", "chain_2", "chain_3"]
        assert np.all([c.n_iter == 5000 for c in rc.chain_configs()])
