import csv
import io
import json
import subprocess
import sys

import pytest

from gammaprime import bayes, cli, pipeline


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestAnalyze:
    def test_text(self, capsys):
        code, out, _ = run(capsys, "analyze", "--table", "20,30,10,40")
        assert code == 0
        values = dict(line.split(None, 1) for line in out.splitlines())
        assert float(values["t"]) == pytest.approx(2.2835012865659023, rel=1e-14)
        assert float(values["gamma_prime"]) == pytest.approx(0.35913724118180695, rel=1e-14)

    def test_json_correct(self, capsys):
        code, out, _ = run(capsys, "analyze", "--table", "0,5,0,5", "--correct", "--format", "json")
        assert code == 0
        assert json.loads(out)["corrected"] is True

    def test_degenerate_is_validation_failure(self, capsys):
        code, _, err = run(capsys, "analyze", "--table", "0,5,0,5")
        assert code == 2 and "haldane" in err.lower()

    @pytest.mark.parametrize("table", ["1,2,3", "a,b,c,d", "1,2,3,-4"])
    def test_bad_table(self, capsys, table):
        code, _, _ = run(capsys, "analyze", "--table", table)
        assert code == 2


class TestBayes:
    def test_builtin_prior(self, capsys, tmp_path):
        out_file = tmp_path / "post.csv"
        code, out, _ = run(
            capsys, "bayes", "--table", "30,20,18,35", "--correct", "--posterior-out", str(out_file)
        )
        assert code == 0
        values = dict(line.split() for line in out.splitlines())
        post = bayes.load_distribution(out_file)
        assert float(values["posterior_mean_gamma_prime"]) == post.mean()
        assert float(values["hpd_low"]) <= float(values["hpd_high"])

    def test_prior_file(self, capsys, tmp_path):
        path = tmp_path / "prior.csv"
        bayes.save_distribution(bayes.build_normal_prior(0.5, n_bins=201), path)
        code, _, _ = run(capsys, "bayes", "--prior", str(path), "--table", "30,20,18,35", "--level", "0.9")
        assert code == 0

    def test_bad_level(self, capsys):
        code, _, _ = run(capsys, "bayes", "--table", "1,2,3,4", "--level", "1.5")
        assert code == 2

    def test_missing_prior_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "bayes", "--prior", str(tmp_path / "nope.csv"), "--table", "1,2,3,4")
        assert code == 2


class TestSimulate:
    def test_csv_output(self, capsys, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("kind = frequentist\nn_cases = 25|50\nn_reps = 3000\n")
        out = tmp_path / "out.csv"
        assert cli.main(["simulate", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert [r["n_cases"] for r in rows] == ["25", "50"]
        assert {"rate_z", "rate_t", "mc_se_z", "mc_se_t"} <= set(rows[0])
        # same seed, same bytes
        out2 = tmp_path / "out2.csv"
        cli.main(["simulate", "--config", str(cfg), "--seed", "5", "--out", str(out2)])
        assert out.read_bytes() == out2.read_bytes()

    def test_json_logistic(self, capsys, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("kind = logistic\npredictor = bernoulli\nn = 500\n")
        code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--format", "json", "--n-datasets", "4")
        assert code == 0
        assert json.loads(out)[0]["n_datasets"] == 4

    def test_invalid_config(self, capsys, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("kind = frequentist\nn_cases = 1\n")
        code, _, err = run(capsys, "simulate", "--config", str(cfg))
        assert code == 2 and "n_cases" in err


class TestPipeline:
    def test_bundled_matrix(self, capsys):
        code, out, _ = run(capsys, "pipeline", "--input", "bundled")
        assert code == 0
        assert out.count("NA") == 8

    def test_exclusion_modes(self, capsys, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("year,item_i,item_j,n11,n12,n21,n22\n2004,1,10,20,10,10,20\n2004,1,2,20,10,10,20\n")
        code, out, _ = run(capsys, "pipeline", "--input", str(data), "--format", "csv")
        flags = {(r["item_i"], r["item_j"]): r["flags"] for r in csv.DictReader(io.StringIO(out))}
        assert code == 0 and flags[("1", "10")] == "excluded"
        code, out, _ = run(capsys, "pipeline", "--input", str(data), "--format", "csv", "--exclusions", "none")
        assert "excluded" not in out
        ex = tmp_path / "ex.txt"
        ex.write_text("1,2\n")
        code, out, _ = run(capsys, "pipeline", "--input", str(data), "--format", "json", "--exclusions", str(ex))
        data_out = {(d["item_i"], d["item_j"]): d for d in json.loads(out)}
        assert data_out[(1, 2)]["flags"] == ["excluded"] and data_out[(1, 10)]["flags"] == []

    def test_validation_failure(self, capsys, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("year,item_i,item_j,n11,n12,n21,n22\n2004,1,2,-1,1,1,1\n")
        code, _, err = run(capsys, "pipeline", "--input", str(data))
        assert code == 2 and "line 2" in err

    def test_numeric_failure_keeps_report(self, capsys, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise bayes.AllZeroLikelihood("all bins vanished")

        monkeypatch.setattr(pipeline.bayes, "sequential_update", boom)
        data = tmp_path / "d.csv"
        data.write_text("year,item_i,item_j,n11,n12,n21,n22\n2004,1,2,5,5,5,5\n")
        out = tmp_path / "r.txt"
        code, _, err = run(capsys, "pipeline", "--input", str(data), "--out", str(out))
        assert code == 3
        assert out.exists() and "NA" in out.read_text()
        assert "AllZeroLikelihood" in err

    def test_empty_input(self, capsys, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("year,item_i,item_j,n11,n12,n21,n22\n")
        code, out, _ = run(capsys, "pipeline", "--input", str(data))
        assert code == 0 and out == ""


class TestSynth:
    def test_matches_bundled(self, tmp_path):
        out = tmp_path / "s.csv"
        assert cli.main(["synth", "--out", str(out)]) == 0
        assert out.read_text() == pipeline.bundled_dataset_path().read_text()


def test_console_script_entry():
    proc = subprocess.run(
        [sys.executable, "-m", "gammaprime.cli", "analyze", "--table", "1,2,3,4"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "gamma_prime" in proc.stdout


def test_usage_error_exit_code(capsys):
    assert cli.main(["nonsense"]) == 2
