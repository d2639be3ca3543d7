import csv
import json
import subprocess
import sys

import pytest

from restcal.cli import main


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    spec = {"n_subjects": 3, "trials_per_class": 8, "seed": 11}
    (root / "spec.json").write_text(json.dumps(spec))
    assert main(["synth", "--spec", str(root / "spec.json"), "--out", str(root / "data")]) == 0
    return root


def _config(root, **kw):
    cfg = {"dataset_root": str(root / "data"), "subjects": ["S1", "S2", "S3"],
           "classifiers": ["lda"], "conditions": ["none", "open@30s"]}
    cfg.update(kw)
    path = root / f"cfg{len(kw)}.json"
    path.write_text(json.dumps(cfg))
    return path


def test_synth_layout(tiny_dataset):
    data = tiny_dataset / "data"
    assert json.loads((data / "dataset.json").read_text())["subjects"] == ["S1", "S2", "S3"]
    assert (data / "S2" / "ground_truth.json").is_file()


def test_inspect(tiny_dataset, capsys):
    assert main(["inspect", str(tiny_dataset / "data" / "S1")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n_channels"] == 11 and info["events"]["cue_left"] == 8
    assert info["resting_s"] == {"open": 120.0, "closed": 120.0, "movement": 60.0}


def test_convert(tiny_dataset, capsys):
    out = tiny_dataset / "copy"
    assert main(["convert", "--in", str(tiny_dataset / "data"), "--out", str(out)]) == 0
    assert (out / "S3" / "signal.f32").is_file()


def test_features(tiny_dataset):
    out = tiny_dataset / "f.csv"
    assert main(["features", "--archive", str(tiny_dataset / "data" / "S1"), "--eye-mode", "open",
                 "--rest-duration", "30", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 17 and len(rows[0]) == 57


def test_loso(tiny_dataset):
    out = tiny_dataset / "res"
    assert main(["loso", "--config", str(_config(tiny_dataset)), "--out", str(out)]) == 0
    res = json.loads((out / "loso.json").read_text())
    assert [r["condition"] for r in res["rows"]] == ["none", "open@30s"]
    assert (out / "loso.csv").read_text().startswith("row,S1,S2,S3,mean")


def test_sweep_duration(tiny_dataset):
    out = tiny_dataset / "sw"
    assert main(["sweep", "--mode", "duration", "--config", str(_config(tiny_dataset, durations=[30])),
                 "--out", str(out)]) == 0
    res = json.loads((out / "sweep_duration.json").read_text())
    assert [r["condition"] for r in res["rows"]] == ["none", "open@30s"]


def test_fold_error_exit_code(tiny_dataset, capsys):
    cfg = _config(tiny_dataset, subjects=["S1", "S7"])
    assert main(["loso", "--config", str(cfg), "--out", str(tiny_dataset / "bad")]) == 1
    assert "S7" in capsys.readouterr().err


def test_bad_archive_exit_code(tmp_path, capsys):
    assert main(["inspect", str(tmp_path)]) == 1
    assert "manifest" in capsys.readouterr().err


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "restcal.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "loso" in r.stdout
