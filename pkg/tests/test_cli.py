import csv
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from nilm_threshold.cli import main

SMALL = [
    "--set", "synth.days=3",
    "--set", "model.width_scale=0.125",
    "--set", "train.epochs=1",
    "--set", "train.methods=MP",
    "--set", "sweep.weights=0,1",
    "--set", "sweep.repetitions=1",
]  # fmt: skip


def schema(name):
    return json.loads(resources.files("nilm_threshold").joinpath(f"schemas/{name}.schema.json").read_text())


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), *SMALL]) == 0
    return out


def run(synth_dir, command, out, *extra):
    return main([command, "--config", str(synth_dir / "household.cfg"), "--out", str(out), *extra])


def test_synth_outputs(synth_dir):
    rows = list(csv.reader((synth_dir / "household.csv").open()))
    assert rows[0] == ["time", "aggregate", "fridge", "dishwasher", "washing_machine"]
    assert len(rows) == 1 + 3 * 1440
    truth = list(csv.reader((synth_dir / "truth_status.csv").open()))
    assert {r[1] for r in truth[1:]} <= {"0", "1"}
    assert "data.paths = household.csv" in (synth_dir / "household.cfg").read_text()


def test_threshold_reports_validate(synth_dir, tmp_path):
    assert run(synth_dir, "threshold", tmp_path) == 0
    th = json.loads((tmp_path / "thresholds.json").read_text())
    jsonschema.validate(th, schema("thresholds"))
    jsonschema.validate(json.loads((tmp_path / "reconstruction.json").read_text()), schema("reconstruction"))
    at = {r["appliance"]: r for r in th["records"] if r["method"] == "AT"}
    assert (at["fridge"]["lambda_watts"], at["fridge"]["mu_off_seconds"], at["fridge"]["mu_on_seconds"]) == (50, 1, 1)
    assert (at["dishwasher"]["lambda_watts"], at["dishwasher"]["mu_on_seconds"]) == (10, 30)
    assert at["fridge"]["m0"] is None
    header = next(csv.reader((tmp_path / "status_fridge.csv").open()))
    assert header == ["time", "power_watts", "status_mp", "status_vs", "status_at"]


def test_quiet_fridge_threshold(tmp_path):
    src = tmp_path / "src"
    args = ["--set", "synth.days=3", "--set", "synth.residual_sd=0", "--set", "data.appliances=fridge"]
    assert main(["synth", "--out", str(src), *args]) == 0
    assert run(src, "threshold", tmp_path / "out") == 0
    records = json.loads((tmp_path / "out" / "thresholds.json").read_text())["records"]
    mp = records[0]
    assert mp["method"] == "MP" and abs(mp["lambda_watts"] - 50) < 2
    assert abs(mp["m1"] - 100) < 2 and abs(mp["m0"]) < 2


def test_train_evaluate_sweep(synth_dir, tmp_path):
    assert run(synth_dir, "train", tmp_path, "--set", "train.methods=MP") == 0
    assert (tmp_path / "model_fridge_mp.ckpt").exists()
    assert not (tmp_path / "model_fridge_vs.ckpt").exists()
    assert run(synth_dir, "evaluate", tmp_path) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    jsonschema.validate(metrics, schema("metrics"))
    cells = {(r["appliance"], r["method"]): r for r in metrics["records"]}
    assert len(cells) == 9
    assert cells["fridge", "MP"]["model"] == "CONV" and cells["fridge", "MP"]["f1"] is not None
    assert cells["fridge", "VS"]["model"] is None and cells["fridge", "VS"]["f1"] is None
    assert run(synth_dir, "sweep", tmp_path / "sweep", "--set", "sweep.repetitions=2") == 0
    rows = list(csv.DictReader((tmp_path / "sweep" / "sweep.csv").open()))
    assert len(rows) == 3 * 2 * 2
    keys = [(r["appliance"], float(r["w"]), int(r["seed"])) for r in rows]
    assert keys == sorted(keys)
    assert {r["f1_kind"] for r in rows if r["w"] == "0.0"} == {"thresholded_regression"}
    assert {r["mae_kind"] for r in rows if r["w"] == "1.0"} == {"reconstruction"}


def test_evaluate_from_other_directory(synth_dir, tmp_path):
    ckpts = tmp_path / "ckpts"
    assert run(synth_dir, "train", ckpts, "--set", "train.epochs=0", "--set", "data.appliances=fridge") == 0
    out = tmp_path / "eval"
    assert run(synth_dir, "evaluate", out, "--set", "data.appliances=fridge", "--checkpoints", str(ckpts)) == 0
    records = json.loads((out / "metrics.json").read_text())["records"]
    assert [r["model"] for r in records] == ["CONV", None, None]


def test_exit_codes(tmp_path, capsys):
    assert main(["threshold", "--set", "bogus=1"]) == 2
    assert main(["threshold", "--set", "loss.w=3"]) == 2
    assert main(["threshold", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["threshold", "--set", f"data.paths={tmp_path / 'missing.csv'}", "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("time,aggregate,fridge,dishwasher,washing_machine\n0,1,x,1,1\n")
    assert main(["threshold", "--set", f"data.paths={bad}", "--out", str(tmp_path)]) == 3
    assert "error:" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    result = subprocess.run([sys.executable, "-m", "nilm_threshold", "--version"], capture_output=True, text=True)
    assert result.returncode == 0 and "nilm-threshold" in result.stdout
    result = subprocess.run(
        [sys.executable, "-m", "nilm_threshold", "threshold", "--set", "nope=1"], capture_output=True, text=True
    )
    assert result.returncode == 2
