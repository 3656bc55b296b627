import csv
import json

import pytest

from normnet import datasets as ds
from normnet.cli import main


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def small_set(workdir):
    path = workdir / "a.jsonl"
    assert main(["generate", "--set", "A", "--per-class", "200", "--seed", "7",
                 "--out", str(path), "--split", "0.7"]) == 0
    return path


@pytest.fixture(scope="module")
def model(workdir, small_set):
    path = workdir / "net.json"
    assert main(["train", "--data", str(small_set.with_name("a_cv.jsonl")), "--out", str(path),
                 "--arch", "8", "--epochs", "5"]) == 0
    return path


class TestGenerate:
    def test_deterministic(self, tmp_path, capsys):
        for name in ("x", "y"):
            code, _, _ = run(capsys, "generate", "--set", "B", "--per-class", "40", "--seed", 7,
                             "--out", tmp_path / f"{name}.jsonl")
            assert code == 0
        assert ds.file_hash(tmp_path / "x.jsonl") == ds.file_hash(tmp_path / "y.jsonl")
        man = json.loads((tmp_path / "x.jsonl.manifest.json").read_text())
        assert man["subcommand"] == "generate" and man["master_seed"] == 7

    def test_split_files(self, small_set):
        cv = ds.load_dataset(small_set.with_name("a_cv.jsonl"))
        test = ds.load_dataset(small_set.with_name("a_test.jsonl"))
        assert (len(cv), len(test)) == (280, 120)

    def test_group_files(self, tmp_path, capsys):
        code, out, _ = run(capsys, "generate", "--set", "C", "--per-size", 4, "--sizes", "10,20",
                           "--out", tmp_path / "c.jsonl")
        assert code == 0
        names = sorted(p.name for p in tmp_path.glob("c_G*.jsonl"))
        assert names == ["c_G1.jsonl", "c_G2.jsonl", "c_G3.jsonl", "c_G4.jsonl"]
        assert len(ds.load_dataset(tmp_path / "c_G2.jsonl")) == 8

    def test_missing_out_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--set", "A"])
        assert exc.value.code == 2

    def test_csv_required(self, tmp_path, capsys):
        code, _, err = run(capsys, "generate", "--set", "height", "--out", tmp_path / "h.jsonl")
        assert code == 2 and "--csv" in err

    def test_bad_csv_is_data_error(self, tmp_path, capsys):
        path = tmp_path / "h.csv"
        path.write_text("age,height\n1,2\n")
        code, _, err = run(capsys, "generate", "--set", "height", "--csv", path,
                           "--out", tmp_path / "h.jsonl")
        assert code == 3 and "MissingColumn" in err


class TestTrainAndTest:
    def test_model_and_report(self, model):
        report = json.loads(model.with_name("net.report.json").read_text())
        assert 1 <= report["epochs_run"] <= 5 and report["records_skipped"] == 0
        assert json.loads(model.read_text())

    def test_missing_data_file(self, tmp_path, capsys):
        code, _, _ = run(capsys, "train", "--data", tmp_path / "nope.jsonl", "--out", tmp_path / "m")
        assert code == 3

    def test_single_sample(self, model, capsys):
        code, out, _ = run(capsys, "test", "--model", model, "--sample", "1,2,3,4,5,6,7,9",
                           "--tests", "SW,JB")
        assert code == 0
        rec = json.loads(out)
        assert rec["n"] == 8 and 0 <= rec["p1"] <= 1 and rec["label"] == int(rec["p1"] >= 0.5)
        assert set(rec["tests"]) == {"SW", "JB"}

    def test_inline_errors(self, tmp_path, capsys):
        path = tmp_path / "s.csv"
        path.write_text("1,2,3,4,5\n4,4,4,4\n1,x,3\n")
        code, out, _ = run(capsys, "test", "--input", path, "--tests", "SW")
        assert code == 0
        recs = [json.loads(line) for line in out.splitlines()]
        assert [r["line"] for r in recs] == [1, 2, 3]
        assert "p_value" in recs[0]["tests"]["SW"]
        assert recs[1]["tests"]["SW"]["error"] == "ConstantSample"
        assert recs[2]["error"] == "ValueError"

    def test_sbnn_too_small(self, workdir, small_set, capsys):
        path = workdir / "sbnn.json"
        code, _, _ = run(capsys, "train", "--data", small_set, "--out", path, "--mode", "sbnn",
                         "--arch", "4", "--epochs", "2")
        assert code == 0
        code, out, _ = run(capsys, "test", "--model", path, "--sample", "1,2,4", "--tests", "SW")
        rec = json.loads(out)
        assert rec["error"] == "SampleTooSmall"


class TestEvaluate:
    def test_outputs(self, workdir, small_set, model, capsys):
        out = workdir / "eval"
        code, printed, _ = run(capsys, "evaluate", "--data", small_set.with_name("a_test.jsonl"),
                               "--model", model, "--tests", "SW,LF", "--alpha", "0.05",
                               "--power", "--reliability", "--bins", "5", "--optimize-threshold",
                               "--out", out)
        assert code == 0
        names = {p.name for p in out.iterdir()}
        assert {"per_size.csv", "comparison.csv", "roc.json", "power_alpha0.1.csv",
                "reliability.csv", "thresholds.csv"} <= names
        rows = list(csv.DictReader((out / "comparison.csv").open()))
        assert [r["method"] for r in rows] == ["DBNN", "SW", "LF"]
        assert all(0 <= float(r["AUROC"]) <= 1 for r in rows)
        roc = json.loads((out / "roc.json").read_text())
        assert set(roc) == {"DBNN", "SW", "LF"}

    def test_reliability_needs_model(self, workdir, small_set, capsys):
        code, _, _ = run(capsys, "evaluate", "--data", small_set, "--tests", "SW",
                         "--reliability", "--out", workdir / "e2")
        assert code == 2


def test_crossval(workdir, small_set, capsys):
    out = workdir / "grid.csv"
    code, _, _ = run(capsys, "crossval", "--data", small_set, "--out", out, "--folds", 2,
                     "--q", "0.1", "--arch", "4;6", "--c", "1", "--epochs", 2)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 and sum(int(r["best"]) for r in rows) == 1


def test_learning_curve(workdir, small_set, capsys):
    out = workdir / "lc.csv"
    code, _, _ = run(capsys, "learning-curve", "--data", small_set, "--out", out,
                     "--fractions", "0.5,1", "--folds", 2, "--arch", "4", "--epochs", 2)
    assert code == 0
    assert len(list(csv.DictReader(out.open()))) == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0 and "normnet" in capsys.readouterr().out
