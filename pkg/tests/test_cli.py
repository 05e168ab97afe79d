import json
import math

import numpy as np
import pytest

from margin_maxer import Schedule, SyntheticSpec, TrajectoryRecord, load_csv
from margin_maxer.cli import ExperimentConfig, execute, main
from margin_maxer.errors import ConfigError

GAMMA = math.sin(math.pi / 100)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def first_json(text):
    return json.loads(text)


class TestExperimentConfig:
    def test_round_trip(self):
        config = ExperimentConfig(
            dataset=SyntheticSpec("sphere-cap", GAMMA, 100, 6),
            algorithm="prgd",
            eta=1.0,
            warmup_kind="gd",
            warmup_steps=1000,
            schedule=Schedule(kind="exp-radius", base=1.2, spacing=5),
            budget=300,
            stop_gap=1e-6,
            fit_window=(10, 200),
        )
        back = ExperimentConfig.from_dict(config.to_dict())
        assert back == config

    def test_path_dataset_round_trip(self):
        config = ExperimentConfig(dataset="somewhere.csv", algorithm="gd", budget=10)
        back = ExperimentConfig.from_dict(config.to_dict())
        assert back == config

    def test_validation_names_field(self):
        with pytest.raises(ConfigError, match="budget"):
            ExperimentConfig(dataset="x.csv", budget=0).validate()
        with pytest.raises(ConfigError, match="stop_gap"):
            ExperimentConfig(dataset="x.csv", stop_gap=-1.0).validate()
        with pytest.raises(ConfigError, match="algorithm"):
            ExperimentConfig(dataset="x.csv", algorithm="adam").validate()

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({"dataset": "x.csv", "learning_rate": 2})

    def test_seed_folds_into_dataset(self):
        config = ExperimentConfig(
            dataset=SyntheticSpec("ball-cap", 0.2, 10, 0), seed=42, budget=5
        )
        resolved = config.resolve()
        assert resolved.dataset.seed == 42
        assert resolved.seed is None


class TestGen:
    def test_toy_csv(self, tmp_path, capsys):
        out = tmp_path / "toy.csv"
        code, stdout, _ = run_cli(
            capsys, "gen", "--family", "toy", "--gamma", "0.5", "--out", str(out)
        )
        assert code == 0
        echo = first_json(stdout)
        assert echo["gamma_star"] == 0.5
        assert echo["w_star"] == [1.0, 0.0]
        assert echo["config"]["family"] == "toy"
        ds = load_csv(out)
        assert ds.n == 3

    def test_deterministic_files(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            code, _, _ = run_cli(
                capsys,
                "gen", "--family", "sphere-cap", "--gamma", "0.2", "--n", "40",
                "--seed", "7", "--out", str(out),
            )
            assert code == 0
        assert a.read_text() == b.read_text()

    def test_bad_gamma_fails(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "gen", "--family", "ball-cap", "--gamma", "1.5",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == 1
        assert "gamma_star" in err

    def test_config_document(self, tmp_path, capsys):
        doc = tmp_path / "spec.json"
        doc.write_text(json.dumps({"family": "ball-cap", "gamma_star": 0.3, "n": 12, "seed": 5}))
        out = tmp_path / "ball.csv"
        code, stdout, _ = run_cli(capsys, "gen", "--config", str(doc), "--out", str(out))
        assert code == 0
        assert first_json(stdout)["config"]["seed"] == 5
        assert load_csv(out).n == 12


class TestSolve:
    def test_dual_on_toy(self, tmp_path, capsys):
        out = tmp_path / "toy.csv"
        run_cli(capsys, "gen", "--family", "toy", "--gamma", "0.5", "--out", str(out))
        code, stdout, _ = run_cli(capsys, "solve", "--data", str(out), "--method", "dual")
        assert code == 0
        payload = first_json(stdout)
        assert payload["solution"]["gamma_star"] == pytest.approx(0.5, abs=1e-8)
        assert payload["ranks"] == {"rank_support": 2, "rank_all": 2}

    def test_exact_requires_family(self, tmp_path, capsys):
        out = tmp_path / "toy.csv"
        run_cli(capsys, "gen", "--family", "toy", "--gamma", "0.5", "--out", str(out))
        code, _, err = run_cli(capsys, "solve", "--data", str(out), "--method", "exact")
        assert code == 1 and "family" in err

    def test_exact_rejects_foreign_file(self, tmp_path, capsys):
        path = tmp_path / "generic.csv"
        path.write_text("x0,x1,y\n0.9,0.1,1\n-0.7,0.2,-1\n0.5,-0.5,1\n")
        code, _, err = run_cli(
            capsys, "solve", "--data", str(path), "--method", "exact", "--family", "sphere-cap"
        )
        assert code == 1 and "error" in err

    def test_antipodal_pair(self, tmp_path, capsys):
        path = tmp_path / "pair.csv"
        path.write_text("x0,x1,y\n1,0,1\n-1,0,-1\n")
        code, stdout, _ = run_cli(capsys, "solve", "--data", str(path), "--method", "dual")
        assert code == 0
        assert first_json(stdout)["solution"]["gamma_star"] == pytest.approx(1.0, abs=1e-8)


class TestRun:
    def test_summary_and_trajectory(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        code, stdout, _ = run_cli(
            capsys,
            "run", "--family", "toy", "--gamma", "0.5", "--algorithm", "ngd",
            "--budget", "200", "--out", str(out),
        )
        assert code == 0
        summary = first_json(stdout)
        assert summary["gamma_star"] == 0.5
        assert summary["final"]["t"] == 200
        assert set(summary["fits"]) == {"power-law", "exponential", "inverse-log"}
        assert (tmp_path / "run.summary.json").exists()
        rec = TrajectoryRecord.from_csv(out)
        assert rec.t[-1] == 200

    def test_stop_gap_reported(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        code, stdout, _ = run_cli(
            capsys,
            "run", "--family", "toy", "--gamma", "0.5", "--algorithm", "ngd",
            "--budget", "100000", "--stop-gap", "1e-3", "--out", str(out),
        )
        assert code == 0
        stop = first_json(stdout)["stop"]
        assert stop["reached"] is True
        assert stop["t_total"] is not None

    def test_config_file_echo_reruns(self, tmp_path, capsys):
        config = ExperimentConfig(
            dataset=SyntheticSpec("toy", 0.5, 3, 0),
            algorithm="prgd",
            warmup_steps=50,
            schedule=Schedule(kind="exp-radius", base=1.2, spacing=5),
            budget=60,
            out=str(tmp_path / "a.csv"),
        )
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config.to_dict()))
        code, stdout, _ = run_cli(capsys, "run", "--config", str(cfg_path))
        assert code == 0
        echoed = first_json(stdout)["config"]
        rerun_path = tmp_path / "config2.json"
        echoed = dict(echoed, out=str(tmp_path / "b.csv"))
        rerun_path.write_text(json.dumps(echoed))
        code, _, _ = run_cli(capsys, "run", "--config", str(rerun_path))
        assert code == 0
        a = (tmp_path / "a.csv").read_text()
        b = (tmp_path / "b.csv").read_text()
        assert a == b


class TestCompare:
    def _write_config(self, tmp_path, name, **kwargs):
        base = dict(
            dataset={"family": "sphere-cap", "gamma_star": GAMMA, "n": 100, "seed": 6},
            budget=400,
            warmup={"kind": "gd", "steps": 300},
        )
        base.update(kwargs)
        path = tmp_path / name
        path.write_text(json.dumps(base))
        return str(path)

    def test_columns_and_dominance(self, tmp_path, capsys):
        configs = [
            self._write_config(tmp_path, "gd.json", algorithm="gd"),
            self._write_config(tmp_path, "ngd.json", algorithm="ngd"),
            self._write_config(
                tmp_path, "prgd_exp.json", algorithm="prgd",
                schedule={"kind": "exp-radius", "base": 1.2, "spacing": 5},
            ),
            self._write_config(
                tmp_path, "prgd_poly.json", algorithm="prgd",
                schedule={"kind": "poly-radius", "alpha": 1.2, "spacing": 5},
            ),
        ]
        out = tmp_path / "cmp.csv"
        code, stdout, _ = run_cli(capsys, "compare", "--config", *configs, "--out", str(out))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,gap_gd,gap_ngd,gap_prgd,gap_prgd2"
        final = first_json(stdout)["final_gaps"]
        assert final["prgd"] < final["ngd"] < final["gd"]
        assert final["prgd2"] < final["ngd"]

    def test_single_config_matches_run(self, tmp_path, capsys):
        cfg = self._write_config(tmp_path, "solo.json", algorithm="ngd", budget=50)
        out = tmp_path / "solo.csv"
        code, _, _ = run_cli(capsys, "compare", "--config", cfg, "--out", str(out))
        assert code == 0
        record, _, _ = execute(ExperimentConfig.from_dict(json.loads(open(cfg).read())))
        lines = out.read_text().splitlines()
        assert len(lines) == len(record.t) + 1

    def test_mismatched_datasets_rejected(self, tmp_path, capsys):
        a = self._write_config(tmp_path, "a.json", algorithm="gd")
        b = self._write_config(
            tmp_path, "b.json", algorithm="ngd",
            dataset={"family": "sphere-cap", "gamma_star": GAMMA, "n": 100, "seed": 7},
        )
        code, _, err = run_cli(capsys, "compare", "--config", a, b)
        assert code == 1 and "same dataset" in err


class TestField:
    def test_export_with_band(self, tmp_path, capsys):
        data_path = tmp_path / "toy.csv"
        run_cli(capsys, "gen", "--family", "toy", "--gamma", "0.5", "--out", str(data_path))
        out = tmp_path / "field.csv"
        code, stdout, _ = run_cli(
            capsys,
            "field", "--data", str(data_path), "--xlim", "-1", "4", "--ylim", "-2", "2",
            "--nx", "6", "--ny", "5", "--out", str(out),
        )
        assert code == 0
        payload = first_json(stdout)
        lo, hi = payload["attractor_band"]
        assert lo == pytest.approx(0.20009435564215727, abs=1e-12)
        assert hi == pytest.approx(3 * lo, rel=1e-12)
        lines = out.read_text().splitlines()
        assert lines[0] == "w1,w2,dir1,dir2,phi"
        assert len(lines) == 31

    def test_dimension_error(self, tmp_path, capsys):
        path = tmp_path / "d3.csv"
        path.write_text("x0,x1,x2,y\n0.5,0,0,1\n-0.5,0.1,0,-1\n")
        code, _, err = run_cli(
            capsys, "field", "--data", str(path), "--xlim", "0", "1", "--ylim", "0", "1"
        )
        assert code == 1 and "slice" in err


class TestHarness:
    def test_log_level_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("MARGIN_MAXER_LOG", "DEBUG")
        out = tmp_path / "toy.csv"
        code, _, _ = run_cli(capsys, "gen", "--family", "toy", "--gamma", "0.5", "--out", str(out))
        assert code == 0

    def test_console_script_installed(self):
        import subprocess

        proc = subprocess.run(
            ["margin-maxer", "--help"], capture_output=True, text=True, check=False
        )
        assert proc.returncode == 0
        assert "gen" in proc.stdout and "compare" in proc.stdout


class TestFit:
    def test_fit_from_csv(self, tmp_path, capsys):
        run_path = tmp_path / "run.csv"
        run_cli(
            capsys,
            "run", "--family", "toy", "--gamma", "0.5", "--algorithm", "ngd",
            "--budget", "3000", "--out", str(run_path),
        )
        code, stdout, _ = run_cli(
            capsys,
            "fit", "--traj", str(run_path), "--family", "power-law",
            "--window", "300", "3000",
        )
        assert code == 0
        fit = first_json(stdout)["fits"]["power-law"]
        assert -1.1 <= fit["slope"] <= -0.9

    def test_all_families(self, tmp_path, capsys):
        run_path = tmp_path / "run.csv"
        run_cli(
            capsys,
            "run", "--family", "toy", "--gamma", "0.5", "--algorithm", "ngd",
            "--budget", "500", "--out", str(run_path),
        )
        code, stdout, _ = run_cli(capsys, "fit", "--traj", str(run_path))
        assert code == 0
        assert set(first_json(stdout)["fits"]) == {"power-law", "exponential", "inverse-log"}
