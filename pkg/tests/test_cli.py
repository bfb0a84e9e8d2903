import csv
import io
import json
import re

import pytest

from accel_dse.cli import main
from accel_dse.pipeline import preset_path

from .test_netlist import FIXTURE

SMALL = ["--n-arch", "6", "3", "3", "--n-knobs", "8", "4", "4"]


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["gen-data", "--out-dir", str(out), "--seed", "3", *SMALL]) == 0
    return out


@pytest.fixture(scope="module")
def small_model(tmp_path_factory, small_data):
    out = tmp_path_factory.mktemp("model")
    argv = ["train", "--data-dir", str(small_data), "--out-dir", str(out), "--models", "gbdt,rf", "--budget", "1"]
    assert main(argv) == 0
    return out


def test_sample_rows_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, out, _ = _run(capsys, "sample", "--method", "lhs", "--n", 24, "--seed", 1, "--out-dir", d)
        assert code == 0
        assert "strata occupied 24/24" in out
    text = (a / "samples_lhs.csv").read_text()
    assert len(text.splitlines()) == 25
    assert text == (b / "samples_lhs.csv").read_text()


def test_usage_errors_exit_2(tmp_path, capsys):
    assert _run(capsys, "sample", "--method", "grid", "--n", 4)[0] == 2
    assert _run(capsys, "extract-lhg", "--netlist", tmp_path / "x.v")[0] == 2
    assert _run(capsys, "frobnicate")[0] == 2


def test_gen_data_unseen_backend_counts(tmp_path, capsys):
    code, _, _ = _run(capsys, "gen-data", "--out-dir", tmp_path, "--n-arch", 24, "--n-knobs", 30, 10, 10)
    assert code == 0
    rows = {s: list(csv.DictReader(io.StringIO((tmp_path / f"{s}.csv").read_text()))) for s in ("train", "val", "test")}
    assert (len(rows["train"]), len(rows["val"]), len(rows["test"])) == (720, 240, 240)
    knobs = {s: {(r["f_target_ghz"], r["util"]) for r in rs} for s, rs in rows.items()}
    assert not knobs["train"] & knobs["test"]
    assert not knobs["train"] & knobs["val"]
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["seed"] == 0 and m["rows"] == {"train": 720, "val": 240, "test": 240}
    assert len(list((tmp_path / "lhg").glob("*.json"))) == 24


def test_gen_data_unseen_arch_counts(tmp_path, capsys):
    code, _, _ = _run(capsys, "gen-data", "--protocol", "unseen-arch", "--out-dir", tmp_path, "--n-knobs", 7)
    assert code == 0
    rows = {s: list(csv.DictReader(io.StringIO((tmp_path / f"{s}.csv").read_text()))) for s in ("train", "val", "test")}
    assert [len(rows[s]) for s in ("train", "val", "test")] == [24 * 7, 10 * 7, 10 * 7]
    designs = {s: {r["design"] for r in rs} for s, rs in rows.items()}
    assert not designs["train"] & designs["test"] and not designs["val"] & designs["test"]


def test_gen_data_bad_split_exit_1(tmp_path, capsys):
    code, _, err = _run(capsys, "gen-data", "--out-dir", tmp_path, "--n-arch", 24, "--n-knobs", 30, 10)
    assert code == 1 and "knob counts" in err
    assert _run(capsys, "gen-data", "--out-dir", tmp_path, "--n-arch", 0, "--n-knobs", 3, 3, 3)[0] == 1


def test_gen_data_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert _run(capsys, "gen-data", "--out-dir", tmp_path / d, "--seed", 5, *SMALL)[0] == 0
    for name in ("train.csv", "val.csv", "test.csv", "manifest.json", "lhg/d0000.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_extract_lhg(tmp_path, capsys):
    src = tmp_path / "toy.v"
    src.write_text("module top (a);\n  input a;\n  mid u0 (.p(a));\nendmodule\nmodule mid (p);\n  input p;\n  leaf u1 (.p(p));\nendmodule\nmodule leaf (p);\n  input p;\nendmodule\n")
    code, out, _ = _run(capsys, "extract-lhg", "--netlist", src, "--top", "top", "--out-dir", tmp_path)
    assert code == 0 and "3 nodes, 2 edges" in out
    g = json.loads((tmp_path / "top.lhg.json").read_text())
    assert len(g["edges"]) == 2


def test_extract_lhg_errors(tmp_path, capsys):
    src = tmp_path / "bad.v"
    lines = FIXTURE.strip().splitlines()
    lines[6] = "  and g0 (w, a, b));"
    src.write_text("\n".join(lines) + "\n")
    code, _, err = _run(capsys, "extract-lhg", "--netlist", src, "--top", "top", "--out-dir", tmp_path)
    assert code == 1 and "line 7" in err
    code, _, err = _run(capsys, "extract-lhg", "--netlist", tmp_path / "none.v", "--top", "top")
    assert code == 1


def test_eval_predictions_equal_targets_gives_zero_table(tmp_path, capsys, small_data):
    code, out, _ = _run(
        capsys, "eval", "--data-dir", small_data, "--predictions", small_data / "test.csv", "--out-dir", tmp_path
    )
    assert code == 0
    row = [l for l in out.splitlines() if l.startswith("given")][0]
    assert set(re.findall(r"\d+\.\d+", row)) == {"0.00"}
    assert "accuracy 1.0000" in out
    res = json.loads((tmp_path / "eval_test.json").read_text())
    assert all(e["mu_ape"] == 0.0 for e in res["errors"].values())


def test_train_eval_roundtrip(tmp_path, capsys, small_data, small_model):
    assert (small_model / "training_log.json").exists()
    code, out, _ = _run(
        capsys, "eval", "--data-dir", small_data, "--model", small_model / "model.json", "--out-dir", tmp_path
    )
    assert code == 0 and "ROI classifier" in out
    assert _run(capsys, "eval", "--data-dir", small_data, "--out-dir", tmp_path)[0] == 1


def test_train_is_byte_identical(tmp_path, capsys, small_data, small_model):
    argv = ["train", "--data-dir", small_data, "--out-dir", tmp_path, "--models", "gbdt,rf", "--budget", 1]
    assert _run(capsys, *argv)[0] == 0
    assert (tmp_path / "model.json").read_bytes() == (small_model / "model.json").read_bytes()


def test_schema_mismatch_exit_1(tmp_path, capsys, small_model):
    other = tmp_path / "other"
    code, _, _ = _run(
        capsys, "gen-data", "--space", preset_path("axiline_dse.json"), "--out-dir", other, "--seed", 1, *SMALL
    )
    assert code == 0
    code, _, err = _run(capsys, "eval", "--data-dir", other, "--model", small_model / "model.json", "--out-dir", tmp_path)
    assert code == 1 and "schema" in err.lower()
    code, _, err = _run(
        capsys, "dse", "--space", preset_path("axiline_dse.json"), "--model", small_model / "model.json",
        "--budget", 5, "--out-dir", tmp_path,
    )
    assert code == 1


def test_train_rejects_unknown_kind(tmp_path, capsys, small_data):
    code, _, err = _run(capsys, "train", "--data-dir", small_data, "--out-dir", tmp_path, "--models", "svm")
    assert code == 1 and "svm" in err


def test_dse_oracle_stable_and_percent_deltas(tmp_path, capsys):
    outs = []
    for d in ("a", "b"):
        code, out, _ = _run(capsys, "dse", "--budget", 30, "--seed", 2, "--out-dir", tmp_path / d)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    for name in ("dse_report.json", "top3.json", "dse_scatter.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    trial_lines = [l for l in outs[0].splitlines() if l.strip().startswith("trial")]
    assert 1 <= len(trial_lines) <= 3
    assert all(re.search(r"energy_mj [+-]\d+\.\d\d%", l) for l in trial_lines)
    # the oracle predicting itself has zero deltas
    top = json.loads((tmp_path / "a" / "top3.json").read_text())
    assert all(abs(v) < 1e-9 for t in top for v in t["delta_pct"].values())


def test_dse_with_surrogate(tmp_path, capsys, small_model):
    code, out, _ = _run(capsys, "dse", "--model", small_model / "model.json", "--budget", 24, "--out-dir", tmp_path)
    assert code == 0 and "best: trial" in out


def test_threads_env_validation(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ACCEL_DSE_THREADS", "zero")
    assert _run(capsys, "sample", "--n", 4, "--out-dir", tmp_path)[0] == 1
    monkeypatch.setenv("ACCEL_DSE_THREADS", "2")
    assert _run(capsys, "sample", "--n", 4, "--out-dir", tmp_path)[0] == 0
