import io
import json
import subprocess
import sys

import pytest

from pooltest.cli import (
    EXIT_INFEASIBLE,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_USAGE,
    run,
)


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def stable(doc):
    doc = dict(doc)
    doc.pop("volatile", None)
    return doc


class TestSolve:
    def test_inst1_json(self):
        code, text = call("solve", "--instance", "inst1", "--budget", "42", "--format", "json")
        assert code == EXIT_OK
        doc = json.loads(text)
        assert doc["schema"] == "pooltest-report/1"
        assert doc["objective"] == pytest.approx(6.29, abs=0.01)
        assert doc["n_groups"] == 14
        assert doc["expected_tests"] <= 42
        assert sum(g["cost"] for g in doc["groups"]) == pytest.approx(doc["objective"], abs=1e-6)
        assert sum(g["expected_tests"] for g in doc["groups"]) == pytest.approx(doc["expected_tests"], abs=1e-6)
        assert sum(g["size"] for g in doc["groups"]) == 54

    def test_json_is_reproducible(self):
        argv = ("solve", "--instance", "inst5", "--budget", "70", "--max-group-size", "32", "--format", "json")
        a = json.loads(call(*argv)[1])
        b = json.loads(call(*argv)[1])
        assert stable(a) == stable(b)

    def test_table_output(self):
        code, text = call("solve", "--instance", "inst6", "--budget", "66")
        assert code == EXIT_OK and "inst6" in text

    def test_infeasible_csv(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("id,risk\na,0.1\nb,0.2\n")
        code, text = call("solve", "--instance", str(path), "--budget", "0.5", "--format", "json")
        assert code == EXIT_INFEASIBLE
        assert json.loads(text)["feasible"] is False

    def test_csv_uses_overrides(self, tmp_path):
        path = tmp_path / "fig.csv"
        risks = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08]
        path.write_text("id,risk\n" + "".join(f"S{k},{p}\n" for k, p in enumerate(risks, 1)))
        code, text = call(
            "solve", "--instance", str(path), "--se", "0.75", "--sp", "0.75", "--lambda", "0.6",
            "--budget", "6", "--format", "json",
        )
        doc = json.loads(text)
        assert code == EXIT_OK
        assert [g["size"] for g in doc["groups"]] == [4, 2, 2]
        assert doc["objective"] == pytest.approx(0.311, abs=1e-3)


class TestErrors:
    def test_missing_subcommand(self):
        assert call()[0] == EXIT_USAGE

    def test_bad_option(self):
        assert call("solve", "--instance", "inst1", "--budget", "lots")[0] == EXIT_USAGE

    def test_unknown_builtin(self):
        assert call("solve", "--instance", "inst9")[0] in (EXIT_USAGE, EXIT_INPUT)

    def test_bad_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,risk\na,zzz\n")
        assert call("solve", "--instance", str(path))[0] == EXIT_INPUT

    def test_missing_file(self, tmp_path):
        assert call("solve", "--instance", str(tmp_path / "nope.json"))[0] == EXIT_INPUT


def test_min_budget_inst6():
    code, text = call("min-budget", "--instance", "inst6", "--format", "json")
    doc = json.loads(text)
    assert code == EXIT_OK
    assert doc["b_min"] == 66
    assert doc["gain_percent"] == pytest.approx(34.0)


def test_min_budget_infeasible(tmp_path):
    path = tmp_path / "high.csv"
    path.write_text("id,risk\na,0.5\nb,0.6\nc,0.7\n")
    assert call("min-budget", "--instance", str(path), "--max-group-size", "3")[0] == EXIT_INFEASIBLE


def test_simulate():
    code, text = call("simulate", "--instance", "inst6", "--budget", "66", "--replications", "20000", "--seed", "3")
    assert code == EXIT_OK and "PASS" in text


def test_verify():
    code, text = call("verify", "--n", "7", "--trials", "10", "--seed", "1")
    assert code == EXIT_OK
    assert "10/10" in text


def test_verify_rejects_large_n():
    assert call("verify", "--n", "30")[0] == EXIT_USAGE


def test_chisq_json():
    code, text = call("chisq", "--a-pos", "10", "--a-tot", "100", "--b-pos", "30", "--b-tot", "100", "--format", "json")
    doc = json.loads(text)
    assert code == EXIT_OK
    assert doc["statistic"] == pytest.approx(12.5)
    assert doc["significant_at_5pct"] is True


def test_paper_tables_json():
    code, text = call("paper-tables", "--format", "json")
    rows = json.loads(text)["rows"]
    assert code == EXIT_OK
    assert [r["L8"]["B"] for r in rows] == [42, 42, 104, 98, 69, 66]
    assert [r["L32"]["B"] for r in rows] == [40, 40, 103, 96, 68, 66]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "pooltest", "chisq", "--a-pos", "1", "--a-tot", "2", "--b-pos", "1", "--b-tot", "2"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "chi2" in proc.stdout
