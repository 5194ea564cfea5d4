"""Result persistence and report rendering.

Each training run writes a ``trial.json`` (full config + metric series).
``emit_report`` collects trials into ``results.csv`` (one row per trial,
learning metrics only, so rows are byte-identical across repeated runs),
``summary.csv`` (seed-mean test accuracy with a 95% normal-approximation
confidence interval), and one SVG chart per dataset showing the EMA-smoothed
validation-accuracy curves per model with two-stage boundaries marked.
"""

from __future__ import annotations

import csv
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .experiment import AeResult, TrialResult, ema_smooth
from .util import environment_stamp, file_sha256, read_json, write_json

RESULT_COLUMNS = [
    "dataset",
    "model",
    "seed",
    "learning_rate",
    "batch_size",
    "epochs",
    "vqc_layers",
    "optimizer",
    "stage_boundary",
    "final_train_loss",
    "final_val_loss",
    "final_val_accuracy",
    "test_accuracy",
]


def save_trial(result: TrialResult, out_dir) -> Path:
    out_dir = Path(out_dir)
    payload = asdict(result)
    payload["type"] = "trial"
    write_json(out_dir / "trial.json", payload)
    return out_dir / "trial.json"


def save_ae_result(result: AeResult, out_dir) -> Path:
    out_dir = Path(out_dir)
    payload = asdict(result)
    payload["type"] = "autoencoder"
    write_json(out_dir / "trial.json", payload)
    return out_dir / "trial.json"


def load_trials(directories) -> list[dict]:
    """Recursively collect trial.json payloads under the given directories."""
    trials = []
    for directory in directories:
        for path in sorted(Path(directory).rglob("trial.json")):
            trials.append(read_json(path))
    return trials


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # shortest exact round-trip form
    return str(value)


def _result_row(trial: dict) -> dict:
    config = trial["config"]
    return {
        "dataset": config["dataset"],
        "model": config["model"],
        "seed": config["seed"],
        "learning_rate": config["learning_rate"],
        "batch_size": config["batch_size"],
        "epochs": config["epochs"],
        "vqc_layers": config["vqc_layers"],
        "optimizer": config["optimizer"],
        "stage_boundary": trial.get("stage_boundary"),
        "final_train_loss": trial["train_loss"][-1] if trial["train_loss"] else None,
        "final_val_loss": trial["val_loss"][-1] if trial["val_loss"] else None,
        "final_val_accuracy": trial["val_accuracy"][-1] if trial["val_accuracy"] else None,
        "test_accuracy": trial["test_accuracy"],
    }


def write_results_csv(trials: list[dict], path) -> None:
    rows = [_result_row(t) for t in trials if t.get("type") == "trial"]
    rows.sort(
        key=lambda r: (
            r["dataset"],
            r["model"],
            r["learning_rate"],
            r["batch_size"],
            r["seed"],
        )
    )
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])


def confidence_interval(values) -> tuple[float, float]:
    """Seed-mean and 95% half-width: mean +- 1.96 * sd / sqrt(n) (sd ddof=1)."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    sd = float(values.std(ddof=1))
    return mean, float(1.96 * sd / np.sqrt(values.size))


def write_summary_csv(trials: list[dict], path) -> None:
    groups: dict[tuple[str, str], list[float]] = {}
    for trial in trials:
        if trial.get("type") != "trial":
            continue
        key = (trial["config"]["dataset"], trial["config"]["model"])
        groups.setdefault(key, []).append(trial["test_accuracy"])
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["dataset", "model", "n_seeds", "mean_test_accuracy", "ci95"])
        for (dataset, model), values in sorted(groups.items()):
            mean, ci = confidence_interval(values)
            writer.writerow([dataset, model, len(values), _fmt(mean), _fmt(ci)])


def _chart_path(out_dir: Path, dataset: str) -> Path:
    return out_dir / f"val_accuracy_{dataset}.svg"


def write_charts(trials: list[dict], out_dir: Path) -> tuple[list[str], list[str]]:
    """One SVG per dataset: seed-mean EMA-smoothed validation accuracy per
    model, with vertical markers at two-stage boundaries."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_dataset: dict[str, dict[str, list[dict]]] = {}
    for trial in trials:
        if trial.get("type") != "trial" or not trial["val_accuracy"]:
            continue
        dataset = trial["config"]["dataset"]
        by_dataset.setdefault(dataset, {}).setdefault(trial["config"]["model"], []).append(trial)
    written, skipped = [], []
    for dataset in sorted(by_dataset):
        models = by_dataset[dataset]
        if not models:
            skipped.append(dataset)
            continue
        fig, ax = plt.subplots(figsize=(7, 4.5))
        boundaries = set()
        for model in sorted(models):
            runs = models[model]
            length = min(len(t["val_accuracy"]) for t in runs)
            curves = np.array([t["val_accuracy"][:length] for t in runs])
            mean_curve = ema_smooth(curves.mean(axis=0))
            ax.plot(np.arange(1, length + 1), mean_curve, label=model)
            for t in runs:
                if t.get("stage_boundary"):
                    boundaries.add(t["stage_boundary"])
        for boundary in sorted(boundaries):
            ax.axvline(boundary, color="gray", linestyle="--", linewidth=0.8)
        ax.set_xlabel("epoch")
        ax.set_ylabel("validation accuracy (EMA)")
        ax.set_title(dataset)
        ax.legend(loc="lower right", fontsize=8)
        fig.tight_layout()
        path = _chart_path(out_dir, dataset)
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path.name)
    return written, skipped


def emit_report(trials: list[dict], out_dir) -> dict:
    """Write results.csv, summary.csv, charts, and a manifest; returns the
    manifest payload."""
    if not trials:
        raise ValueError("no trials to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(trials, out_dir / "results.csv")
    write_summary_csv(trials, out_dir / "summary.csv")
    charts, skipped = write_charts(trials, out_dir)
    files = ["results.csv", "summary.csv"] + charts
    manifest = {
        "trials": len(trials),
        "charts": charts,
        "datasets_without_charts": skipped,
        "checksums": {name: file_sha256(out_dir / name) for name in files},
        "environment": environment_stamp(),
    }
    write_json(out_dir / "manifest.json", manifest)
    return manifest
