"""Command-line interface: prepare, train-ae, train, grid, report.

Every command writes a JSON manifest next to its outputs (environment stamp,
config, file checksums). Concurrency for grid runs is capped by the
``HQB_WORKERS`` environment variable.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import DATASET_NAMES, load_prepared, prepare_dataset
from .experiment import (
    GridSpec,
    TrainConfig,
    grid_search,
    run_trial,
    train_autoencoder,
)
from .models import (
    ModelKind,
    ENCODER_KINDS,
    load_encoder,
    save_autoencoder,
    save_checkpoint,
)
from .report import emit_report, load_trials, save_trial
from .util import environment_stamp, file_sha256, read_json, write_json


def _cmd_prepare(args) -> int:
    dataset = prepare_dataset(
        args.dataset,
        args.input,
        seed=args.seed,
        out_dir=args.out,
        subsample_train=args.subsample_train,
        subsample_test=args.subsample_test,
        label_column=args.label_column,
    )
    sizes = {name: int(dataset.subset(name).size) for name in ("train", "val", "test")}
    print(
        f"prepared {args.dataset}: {dataset.features.shape[0]} rows, "
        f"{dataset.n_features} features, {dataset.n_classes} classes, split {sizes} -> {args.out}"
    )
    return 0


def _cmd_train_ae(args) -> int:
    dataset = load_prepared(args.dataset)
    config = TrainConfig(
        model=None,
        dataset=dataset.name,
        seed=args.seed,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
    )
    encoder, autoencoder, result = train_autoencoder(dataset, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_autoencoder(out, autoencoder, dataset.n_features, dataset.n_classes, args.seed)
    manifest = {
        "config": result.config,
        "train_loss": result.train_loss,
        "val_loss": result.val_loss,
        "test_loss": result.test_loss,
        "wall_seconds": result.wall_seconds,
        "environment": environment_stamp(),
        "checksums": {out.name: file_sha256(out)},
    }
    write_json(out.with_suffix(out.suffix + ".manifest.json"), manifest)
    print(
        f"autoencoder on {dataset.name} seed {args.seed}: "
        f"test reconstruction loss {result.test_loss:.6f} -> {out}"
    )
    return 0


def _cmd_train(args) -> int:
    dataset = load_prepared(args.dataset)
    kind = ModelKind(args.model)
    encoder = None
    if kind in ENCODER_KINDS:
        if not args.encoder:
            print(f"error: --encoder is required for {kind.value}", file=sys.stderr)
            return 2
        encoder, _ = load_encoder(args.encoder)
    config = TrainConfig(
        model=kind,
        dataset=dataset.name,
        seed=args.seed,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        vqc_layers=args.layers,
    )
    model, result = run_trial(config, dataset, encoder=encoder)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_trial(result, out)
    save_checkpoint(model, out / "model.npz")
    manifest = {
        "config": result.config,
        "environment": environment_stamp(),
        "checksums": {
            "trial.json": file_sha256(out / "trial.json"),
            "model.npz": file_sha256(out / "model.npz"),
        },
    }
    write_json(out / "manifest.json", manifest)
    print(
        f"{kind.value} on {dataset.name} seed {args.seed}: "
        f"test accuracy {result.test_accuracy:.4f} -> {out}"
    )
    return 0


def _cmd_grid(args) -> int:
    payload = read_json(args.config)
    dataset = load_prepared(payload["dataset"])
    spec = GridSpec(
        target=payload.get("target", "model"),
        axes=payload["axes"],
        seeds=tuple(payload["seeds"]),
        epochs=payload["epochs"],
        model=ModelKind(payload["model"]) if payload.get("model") else None,
        vqc_layers=payload.get("layers", 6),
    )
    encoders = None
    if spec.model in ENCODER_KINDS:
        template = payload.get("encoder")
        if not template:
            print("error: grid over an encoder-based model needs an 'encoder' path "
                  "template with a {seed} placeholder", file=sys.stderr)
            return 2
        encoders = {
            seed: load_encoder(template.format(seed=seed))[0] for seed in spec.seeds
        }
    best, table = grid_search(spec, dataset, encoders)
    out = Path(payload.get("out", "grid-out"))
    out.mkdir(parents=True, exist_ok=True)
    cells = []
    for cell in table:
        metric_key = "test_loss" if spec.target == "ae" else "test_accuracy"
        cells.append(
            {
                "values": cell.values,
                "mean_metric": cell.mean_metric,
                "failed": cell.failed,
                "per_seed": [getattr(r, metric_key) for r in cell.results],
            }
        )
    grid_payload = {
        "target": spec.target,
        "model": spec.model.value if spec.model else None,
        "dataset": payload["dataset"],
        "seeds": list(spec.seeds),
        "best": best,
        "cells": cells,
    }
    write_json(out / "grid.json", grid_payload)
    manifest = {
        "config": payload,
        "environment": environment_stamp(),
        "checksums": {"grid.json": file_sha256(out / "grid.json")},
    }
    write_json(out / "manifest.json", manifest)
    print(f"grid best cell: {best} -> {out / 'grid.json'}")
    return 0


def _cmd_report(args) -> int:
    trials = load_trials(args.inputs)
    if not trials:
        print("error: no trial.json files found under the given directories", file=sys.stderr)
        return 2
    manifest = emit_report(trials, args.out)
    print(
        f"report over {manifest['trials']} trials -> {args.out} "
        f"(charts: {', '.join(manifest['charts']) or 'none'})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hqb",
        description="Hybrid quantum-classical classification benchmarks on a "
        "from-scratch state-vector simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest, normalize, and split a dataset")
    p.add_argument("--dataset", required=True, choices=DATASET_NAMES)
    p.add_argument("--input", required=True, nargs="+", help="source file(s); mnist takes "
                   "train-images train-labels test-images test-labels")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--subsample-train", type=int, default=None,
                   help="keep this many rows of the training portion (desk-scale runs)")
    p.add_argument("--subsample-test", type=int, default=None,
                   help="keep this many rows of the designated test portion")
    p.add_argument("--label-column", type=int, default=-1,
                   help="CSV label column index (default: last)")
    p.set_defaults(func=_cmd_prepare)

    p = sub.add_parser("train-ae", help="train the reconstruction autoencoder")
    p.add_argument("--dataset", required=True, help="prepared dataset directory")
    p.add_argument("--lr", required=True, type=float)
    p.add_argument("--batch", required=True, type=int)
    p.add_argument("--epochs", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True, help="checkpoint file (.npz)")
    p.set_defaults(func=_cmd_train_ae)

    p = sub.add_parser("train", help="train one classifier")
    p.add_argument("--model", required=True, choices=[k.value for k in ModelKind])
    p.add_argument("--dataset", required=True, help="prepared dataset directory")
    p.add_argument("--lr", required=True, type=float)
    p.add_argument("--batch", type=int, default=5)
    p.add_argument("--epochs", required=True, type=int)
    p.add_argument("--layers", type=int, default=6)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--encoder", default=None, help="autoencoder checkpoint (ae-vqc, ae-nn)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("grid", help="grid search from a JSON spec")
    p.add_argument("--config", required=True, help="JSON grid specification")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("report", help="aggregate trials into CSVs and charts")
    p.add_argument("--in", dest="inputs", required=True, nargs="+",
                   help="directories containing trial.json files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
