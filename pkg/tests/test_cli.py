import csv
import json

import numpy as np
import pytest

from hqb.cli import main


@pytest.fixture(scope="module")
def toy_csv(tmp_path_factory):
    rng = np.random.default_rng(0)
    path = tmp_path_factory.mktemp("data") / "toy.csv"
    rows = ["a,b,c,d,label"]
    for _ in range(60):
        label = int(rng.integers(0, 2))
        feats = rng.normal(size=4)
        feats[0] += 3.0 * label  # separable
        rows.append(",".join(f"{v:.6f}" for v in feats) + f",{label}")
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture(scope="module")
def prepared_dir(toy_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("prepared") / "toy"
    rc = main([
        "prepare", "--dataset", "banknote", "--input", str(toy_csv),
        "--seed", "0", "--out", str(out),
    ])
    assert rc == 0
    return out


def test_prepare_writes_manifest(prepared_dir):
    manifest = json.loads((prepared_dir / "manifest.json").read_text())
    assert manifest["split_sizes"] == {"train": 48, "val": 6, "test": 6}
    assert manifest["rows"] == 60


def test_train_ae_and_classifiers(prepared_dir, tmp_path):
    ckpt = tmp_path / "ae.npz"
    rc = main([
        "train-ae", "--dataset", str(prepared_dir), "--lr", "0.05", "--batch", "16",
        "--epochs", "30", "--seed", "0", "--out", str(ckpt),
    ])
    assert rc == 0
    assert ckpt.exists()
    side_manifest = json.loads((ckpt.parent / "ae.npz.manifest.json").read_text())
    assert len(side_manifest["train_loss"]) == 30

    run_nn = tmp_path / "run_nn"
    rc = main([
        "train", "--model", "nn", "--dataset", str(prepared_dir), "--lr", "0.1",
        "--epochs", "5", "--seed", "0", "--out", str(run_nn),
    ])
    assert rc == 0
    trial = json.loads((run_nn / "trial.json").read_text())
    assert len(trial["val_accuracy"]) == 5
    assert (run_nn / "model.npz").exists() and (run_nn / "manifest.json").exists()

    run_aevqc = tmp_path / "run_aevqc"
    rc = main([
        "train", "--model", "ae-vqc", "--dataset", str(prepared_dir), "--lr", "0.1",
        "--epochs", "2", "--layers", "2", "--seed", "0",
        "--encoder", str(ckpt), "--out", str(run_aevqc),
    ])
    assert rc == 0

    run_dqc = tmp_path / "run_dqc"
    rc = main([
        "train", "--model", "dqc", "--dataset", str(prepared_dir), "--lr", "0.1",
        "--epochs", "2", "--layers", "2", "--seed", "0", "--out", str(run_dqc),
    ])
    assert rc == 0
    trial = json.loads((run_dqc / "trial.json").read_text())
    assert trial["stage_boundary"] == 2 and len(trial["val_accuracy"]) == 4

    report_dir = tmp_path / "report"
    rc = main(["report", "--in", str(tmp_path), "--out", str(report_dir)])
    assert rc == 0
    with open(report_dir / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["model"] for r in rows} == {"nn", "ae-vqc", "dqc"}
    assert (report_dir / "summary.csv").exists()
    assert (report_dir / "val_accuracy_banknote.svg").exists()


def test_train_encoder_required(prepared_dir, tmp_path, capsys):
    rc = main([
        "train", "--model", "ae-nn", "--dataset", str(prepared_dir), "--lr", "0.1",
        "--epochs", "1", "--seed", "0", "--out", str(tmp_path / "x"),
    ])
    assert rc == 2
    assert "--encoder" in capsys.readouterr().err


def test_grid_command(prepared_dir, tmp_path):
    config = {
        "target": "model",
        "model": "nn",
        "dataset": str(prepared_dir),
        "axes": {"learning_rate": [0.001, 0.2]},
        "seeds": [0, 1],
        "epochs": 6,
        "out": str(tmp_path / "grid"),
    }
    cfg_path = tmp_path / "grid.json"
    cfg_path.write_text(json.dumps(config))
    rc = main(["grid", "--config", str(cfg_path)])
    assert rc == 0
    payload = json.loads((tmp_path / "grid" / "grid.json").read_text())
    assert payload["best"] == {"learning_rate": 0.2}
    assert len(payload["cells"]) == 2
    assert all(len(c["per_seed"]) == 2 for c in payload["cells"])


def test_report_requires_trials(tmp_path, capsys):
    rc = main(["report", "--in", str(tmp_path), "--out", str(tmp_path / "r")])
    assert rc == 2
