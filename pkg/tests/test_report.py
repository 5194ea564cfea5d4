import csv
import json

import numpy as np
import pytest

import hqb.report as rep
from hqb.experiment import TrialResult


def make_trial(dataset="toy", model="nn", seed=0, acc=0.8, lr=0.1, boundary=None, epochs=3):
    rng = np.random.default_rng(seed)
    return {
        "type": "trial",
        "config": {
            "model": model,
            "dataset": dataset,
            "seed": seed,
            "learning_rate": lr,
            "epochs": epochs,
            "batch_size": 5,
            "vqc_layers": 6,
            "optimizer": "sgd",
        },
        "train_loss": list(rng.uniform(0.1, 1.0, epochs)),
        "val_loss": list(rng.uniform(0.1, 1.0, epochs)),
        "val_accuracy": list(rng.uniform(0.4, 0.9, epochs)),
        "test_accuracy": acc,
        "stage_boundary": boundary,
        "wall_seconds": rng.uniform(0, 60),  # must never leak into results.csv
    }


class TestConfidenceInterval:
    def test_identical_values_zero_width(self):
        mean, ci = rep.confidence_interval([0.8] * 10)
        assert mean == 0.8 and ci == 0.0

    def test_two_values_hand_computed(self):
        mean, ci = rep.confidence_interval([0.7, 0.9])
        assert mean == pytest.approx(0.8)
        sd = np.sqrt(((0.7 - 0.8) ** 2 + (0.9 - 0.8) ** 2) / 1)  # ddof=1
        assert ci == pytest.approx(1.96 * sd / np.sqrt(2))
        assert ci == pytest.approx(1.96 * 0.14142135623730953 / np.sqrt(2))

    def test_single_value(self):
        mean, ci = rep.confidence_interval([0.5])
        assert mean == 0.5 and ci == 0.0


class TestEmitReport:
    def test_outputs_and_manifest(self, tmp_path):
        trials = [
            make_trial(seed=s, acc=0.7 + 0.01 * s, model=m, boundary=2 if m == "dqc" else None)
            for s in range(3)
            for m in ("nn", "dqc")
        ]
        manifest = rep.emit_report(trials, tmp_path)
        assert (tmp_path / "results.csv").exists()
        assert (tmp_path / "summary.csv").exists()
        assert manifest["charts"] == ["val_accuracy_toy.svg"]
        assert (tmp_path / "val_accuracy_toy.svg").exists()
        payload = json.loads((tmp_path / "manifest.json").read_text())
        assert set(payload["checksums"]) == {"results.csv", "summary.csv", "val_accuracy_toy.svg"}
        assert payload["environment"]["rng"] == "philox"

    def test_results_rows_and_columns(self, tmp_path):
        trials = [make_trial(seed=1, acc=0.75)]
        rep.write_results_csv(trials, tmp_path / "results.csv")
        with open(tmp_path / "results.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        row = rows[0]
        assert row["test_accuracy"] == "0.75"
        assert row["stage_boundary"] == ""
        assert "wall_seconds" not in row

    def test_summary_values(self, tmp_path):
        trials = [make_trial(seed=s, acc=a) for s, a in enumerate((0.7, 0.9))]
        rep.write_summary_csv(trials, tmp_path / "summary.csv")
        with open(tmp_path / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["n_seeds"] == "2"
        assert float(rows[0]["mean_test_accuracy"]) == pytest.approx(0.8)
        assert float(rows[0]["ci95"]) == pytest.approx(1.96 * np.sqrt(0.02) / np.sqrt(2))

    def test_byte_identical_for_identical_trials(self, tmp_path):
        # wall-clock differs between the two collections; rows must not
        trials_a = [make_trial(seed=s) for s in range(3)]
        trials_b = [make_trial(seed=s) for s in range(3)]
        for t in trials_b:
            t["wall_seconds"] += 123.456
        rep.write_results_csv(trials_a, tmp_path / "a.csv")
        rep.write_results_csv(trials_b, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_empty_collection_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            rep.emit_report([], tmp_path)

    def test_chartless_dataset_noted(self, tmp_path):
        trial = make_trial()
        trial["val_accuracy"] = []
        manifest = rep.emit_report([trial], tmp_path)
        assert manifest["charts"] == []
        assert (tmp_path / "results.csv").exists()

    def test_save_and_load_roundtrip(self, tmp_path):
        result = TrialResult(
            config={"model": "nn", "dataset": "toy", "seed": 0, "learning_rate": 0.1,
                    "epochs": 2, "batch_size": 5, "vqc_layers": 6, "optimizer": "sgd"},
            train_loss=[0.5, 0.4],
            val_loss=[0.6, 0.5],
            val_accuracy=[0.7, 0.8],
            test_accuracy=0.75,
            wall_seconds=1.5,
        )
        rep.save_trial(result, tmp_path / "run1")
        trials = rep.load_trials([tmp_path])
        assert len(trials) == 1
        assert trials[0]["test_accuracy"] == 0.75
        assert trials[0]["type"] == "trial"
