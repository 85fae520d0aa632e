from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from potts_anneal import cli
from potts_anneal.encoding import ferromagnet, save_instance

from conftest import random_model


def run(argv, capsys=None):
    out = io.StringIO()
    code = cli.dispatch(argv, stdout=out)
    return code, out.getvalue()


@pytest.fixture
def instance(tmp_path):
    path = tmp_path / "inst.json"
    save_instance(ferromagnet(8, 4), path)
    return path


class TestUsage:
    def test_unknown_command(self, capsys):
        assert run(["frobnicate"])[0] == cli.EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self, capsys, tmp_path):
        code, _ = run(["infq", "--bogus", "1", "--out", str(tmp_path / "x.csv")])
        assert code == cli.EXIT_USAGE
        assert not (tmp_path / "x.csv").exists()

    def test_runtime_error_leaves_no_files(self, tmp_path, capsys):
        code, _ = run(["meanfield", "--Q", "3", "--constraint", "half_hot",
                       "--out", str(tmp_path / "m.csv")])
        assert code == cli.EXIT_RUNTIME
        assert list(tmp_path.iterdir()) == []
        assert "error" in capsys.readouterr().err

    def test_missing_instance(self, tmp_path):
        assert run(["encode", "--instance", str(tmp_path / "none.json")])[0] == cli.EXIT_RUNTIME


class TestMeanfield:
    def test_csv_and_manifest(self, tmp_path):
        out = tmp_path / "mf.csv"
        code, text = run(["meanfield", "--Q", "2", "--gamma-max", "0.3", "--gamma-step", "0.1",
                          "--out", str(out)])
        assert code == 0
        assert "classification=second_order" in text
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["gamma", "m_plus", "m_minus", "free_energy", "eps_min"]
        assert [float(r[0]) for r in rows[1:]] == [0.3, 0.2, 0.1, 0.0]
        manifest = json.loads((tmp_path / "mf.csv.manifest.json").read_text())
        assert manifest["command"] == "meanfield"
        assert manifest["parameters"]["Q"] == 2
        assert manifest["parameters"]["beta"] == "inf"
        assert manifest["output_paths"] == [str(out)]
        assert manifest["results"]["classification"] == "second_order"
        assert manifest["tool_version"]

    def test_manifest_reproduces(self, tmp_path):
        out = tmp_path / "mf.csv"
        run(["meanfield", "--Q", "3", "--gamma-max", "0.2", "--gamma-step", "0.1", "--out", str(out)])
        first = out.read_bytes()
        argv = json.loads((tmp_path / "mf.csv.manifest.json").read_text())["argv"]
        out.unlink()
        assert run(argv)[0] == 0
        assert out.read_bytes() == first

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "3")
        args = cli.build_parser().parse_args(["meanfield", "--Q", "2"])
        assert args.threads == 3


class TestInfq:
    def test_zero_temperature(self):
        code, text = run(["infq", "--J", "1", "--beta", "inf", "--gamma", "0.6"])
        assert code == 0
        rows = list(csv.reader(io.StringIO(text)))
        assert rows == [["gamma", "m"], ["0.6", "0.8"]]

    def test_grid(self):
        _, text = run(["infq", "--gamma-max", "1.5", "--gamma-step", "0.5"])
        rows = list(csv.reader(io.StringIO(text)))[1:]
        assert [r[0] for r in rows] == ["0", "0.5", "1", "1.5"]
        assert float(rows[-1][1]) == 0.0

    def test_needs_gammas(self):
        assert run(["infq"])[0] == cli.EXIT_RUNTIME


class TestReplica:
    def test_scan(self, tmp_path):
        out = tmp_path / "rs.csv"
        code, _ = run(["replica", "--beta", "0.5,2", "--gamma", "0", "--order", "32",
                       "--out", str(out)])
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert [float(r["beta"]) for r in rows] == [0.5, 2.0]
        assert float(rows[0]["xi"]) < 1e-6 and float(rows[1]["xi"]) > 0.5
        assert all(r["converged"] == "true" for r in rows)

    def test_infinite_beta_rejected(self):
        assert run(["replica", "--beta", "inf", "--gamma", "0"])[0] == cli.EXIT_RUNTIME


class TestEncodeAnneal:
    def test_encode_and_anneal(self, tmp_path, instance):
        qm_path, qubo_path = tmp_path / "qm.json", tmp_path / "q.json"
        assert run(["encode", "--instance", str(instance), "--out", str(qm_path),
                    "--qubo", str(qubo_path)])[0] == 0
        assert (tmp_path / "q.json.manifest.json").exists()
        for model in (qm_path, qubo_path):
            res_path = tmp_path / f"res_{model.stem}.json"
            assert run(["anneal", "--model", str(model), "--seed", "2", "--out", str(res_path)])[0] == 0
            res = json.loads(res_path.read_text())
            # ferromagnet, all 8 rows aligned with two components each
            assert res["best_energy"] == pytest.approx(-14.0)

    def test_anneal_deterministic(self, tmp_path, instance):
        qm_path = tmp_path / "qm.json"
        run(["encode", "--instance", str(instance), "--out", str(qm_path)])
        a = run(["anneal", "--model", str(qm_path), "--seed", "5", "--sweeps", "50"])[1]
        b = run(["anneal", "--model", str(qm_path), "--seed", "5", "--sweeps", "50"])[1]
        assert a == b


class TestIterate:
    def test_ferromagnet(self, tmp_path, instance):
        out = tmp_path / "it.json"
        assert run(["iterate", "--instance", str(instance), "--seed", "1", "--out", str(out)])[0] == 0
        res = json.loads(out.read_text())
        assert res["rounds"] == 2
        assert res["energy"] == pytest.approx(-14.0)
        assert len(res["history"]) == 3

    def test_answer_only_fails_cleanly(self, tmp_path, instance):
        out = tmp_path / "it.json"
        code, _ = run(["iterate", "--instance", str(instance), "--export-dir", str(tmp_path / "q"),
                       "--answer-only", "--out", str(out)])
        assert code == cli.EXIT_RUNTIME
        assert not out.exists()
        assert (tmp_path / "q" / "round_0.qubo.json").exists()

    def test_glass_instance(self, tmp_path):
        path = tmp_path / "glass.json"
        save_instance(random_model(3, 5, 4), path)
        code, text = run(["iterate", "--instance", str(path)])
        assert code == 0
        assert len(json.loads(text)["assignment"]) == 5
