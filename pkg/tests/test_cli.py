import json

import pytest

from soilnir.cli import main

SPEC = {
    "n_samples": 90, "seed": 5, "spectral_noise_sd": 1e-4,
    "bands": [{"center_nm": 700, "width_nm": 20, "depth_min": 0, "depth_max": 0.2},
              {"center_nm": 1900, "width_nm": 30, "depth_min": 0, "depth_max": 0.2}],
    "properties": {
        "pH": {"intercept": 5.0, "weights": [12.0, 0.0], "noise_rel": 0.05},
        "OM": {"intercept": 3.0, "weights": [0.0, 0.0], "noise_sd": 1.0},
        "Ca": {"intercept": 1.0, "weights": [5.0, 25.0], "noise_rel": 0.05},
        "Mg": {"intercept": 2.0, "weights": [10.0, 5.0], "noise_rel": 0.1},
        "K": {"intercept": 0.1, "weights": [1.0, 1.0], "noise_rel": 0.1},
        "Na": {"intercept": 0.5, "weights": [0.0, 4.0], "noise_rel": 0.1},
    },
}


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    (d / "spec.json").write_text(json.dumps(SPEC))
    assert main(["synth", str(d / "spec.json"), "--out", str(d)]) == 0
    return d


def _io(data):
    return ["--spectra", str(data / "spectra.csv"), "--labels", str(data / "labels.csv")]


def _json_out(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_synth_outputs(data):
    assert (data / "spectra.csv").read_text().count("\n") == 91
    assert json.loads((data / "synth_spec.json").read_text())["seed"] == 5
    meta = json.loads((data / "metadata.json").read_text())
    assert meta["command"] == "synth" and "timestamp" in meta


def test_synth_seed_flag_overrides_spec(data, tmp_path):
    assert main(["synth", str(data / "spec.json"), "--seed", "9", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "synth_spec.json").read_text())["seed"] == 9
    assert (tmp_path / "spectra.csv").read_bytes() != (data / "spectra.csv").read_bytes()


def test_preprocess_columns(data, tmp_path, capsys):
    assert main(["preprocess", *_io(data), "--out", str(tmp_path / "a")]) == 0
    assert _json_out(capsys) == {"features": 988, "samples": 90}
    header = (tmp_path / "a" / "features.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 989 and header[1] == "raw_400.0"
    assert main(["preprocess", *_io(data), "--blocks", "raw", "--out", str(tmp_path / "b")]) == 0
    assert _json_out(capsys)["features"] == 247


def test_out_from_environment(data, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SOILNIR_OUT", str(tmp_path / "env"))
    assert main(["preprocess", *_io(data), "--blocks", "d1"]) == 0
    assert (tmp_path / "env" / "features.csv").is_file()


def test_invalid_inputs_exit_2(data, tmp_path, capsys):
    out = ["--out", str(tmp_path)]
    assert main(["preprocess", "--spectra", str(data / "spectra.csv"), *out]) == 2
    assert "no labels file" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**SPEC, "bands": [{"center_nm": 5000, "width_nm": 10}]}))
    assert main(["synth", str(bad), *out]) == 2
    bad.write_text("{not json")
    assert main(["synth", str(bad), *out]) == 2
    assert main(["regress", "Zn", *_io(data), *out]) == 2
    assert main(["preprocess", *_io(data), "--folds", "1", *out]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["preprocess", *_io(data), "--config", str(cfg), *out]) == 2
    assert "unknown config keys" in capsys.readouterr().err
    cfg.write_text(json.dumps({"candidates": ["ols"]}))
    assert main(["regress", "pH", *_io(data), "--config", str(cfg), *out]) == 2


@pytest.mark.parametrize("cmd", ["preprocess", "regress", "classify", "rank", "synth"])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as e:
        main([cmd, "--help"])
    assert e.value.code == 0 and "--seed" in capsys.readouterr().out


def test_regress_selects_and_rejects(data, tmp_path, capsys):
    out = tmp_path / "r"
    args = ["regress", "pH", "OM", *_io(data), "--blocks", "d1,d2", "--out", str(out)]
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_boot": 50, "candidates": ["OLS", "LASSO"]}))
    assert main(args + ["--config", str(cfg)]) == 0
    status = _json_out(capsys)
    assert status["pH"].startswith("selected: ") and status["OM"] == "not suitable"
    doc = json.loads((out / "regression_pH.json").read_text())
    assert doc["split"]["n_train"] == 63 and doc["split"]["n_test"] == 27
    assert (out / "predictions_pH.csv").is_file() and not (out / "predictions_OM.csv").exists()
    assert any(p.name.startswith("pH_") for p in (out / "models").iterdir())


def test_regress_log_target(data, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_boot": 20, "candidates": ["OLS"]}))
    assert main(["regress", "Ca", *_io(data), "--blocks", "d2", "--log-target",
                 "--config", str(cfg), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "regression_Ca.json").read_text())
    assert doc["target_space"] == "log"


def test_classify_count_only(capsys):
    assert main(["classify", "pH", "Na", "--count-only"]) == 0
    assert capsys.readouterr().out.splitlines() == ["pH: 117649 grid points",
                                                    "Na: 22500 grid points"]
    assert main(["classify", "pH", "--count-only", "--coarse"]) == 0
    assert main(["classify", "Na", "--count-only", "--grid", "1:25"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "Na: 625 grid points"


def test_classify_outputs(data, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"classifiers": ["tree:4", "knn:euclidean", "svm:linear"]}))
    assert main(["classify", "Na", *_io(data), "--blocks", "d1", "--grid", "1,2,3",
                 "--config", str(cfg), "--out", str(tmp_path)]) == 0
    summary = _json_out(capsys)["Na"]
    assert summary["grid_points"] == 9 and summary["best_mcc"] >= summary["uniform_mcc"]
    for suffix in ("", "_sweep", "_confusion_uniform", "_confusion_best", "_metrics",
                   "_surface", "_checkpoint"):
        ext = ".json" if suffix == "" else ".jsonl" if suffix == "_checkpoint" else ".csv"
        assert (tmp_path / f"classify_Na{suffix}{ext}").is_file()
    doc = json.loads((tmp_path / "classify_Na.json").read_text())
    assert sum(doc["class_counts"]) == 90 and len(doc["sweep"]) == 3


def test_rank_all_properties(data, tmp_path, capsys):
    assert main(["rank", *_io(data), "--out", str(tmp_path)]) == 0
    assert set(_json_out(capsys)) == {"pH", "OM", "Ca", "Mg", "K", "Na"}
    assert len(list(tmp_path.glob("ranking_*.json"))) == 6
    rows = (tmp_path / "ranking_heatmap.csv").read_text().splitlines()
    assert len(rows) == 248 and len(rows[0].split(",")) == 7
