"""Training loops, the two-stage transfer procedure, grid search, and metrics.

Every trial is a pure function of (config, dataset, seed): initialization,
batch order, and all updates draw from named Philox streams, so repeated runs
reproduce metric series bit for bit.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import rng as rng_streams
from .data import Dataset, batches
from .models import (
    HybridModel,
    ModelKind,
    Stage,
    TWO_STAGE_KINDS,
    build_autoencoder,
    build_model,
    model_backward,
    model_forward,
    split_encoder,
    trainable_arrays,
)
from .neural import (
    MlpSpec,
    OptimizerKind,
    OptimizerState,
    cross_entropy_loss,
    mlp_backward,
    mlp_forward,
    mse_loss,
    optimizer_step,
)

WORKERS_ENV = "HQB_WORKERS"


class TrainingDiverged(RuntimeError):
    """Loss became non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    model: ModelKind | None  # None for autoencoder-only runs
    dataset: str
    seed: int
    learning_rate: float
    epochs: int
    batch_size: int = 5
    vqc_layers: int = 6
    optimizer: OptimizerKind = OptimizerKind.SGD

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("batch size and learning rate must be positive")


@dataclass
class TrialResult:
    """Metric series for one (model, dataset, seed, hyperparameter) cell."""

    config: dict
    train_loss: list[float]
    val_loss: list[float]
    val_accuracy: list[float]
    test_accuracy: float
    stage_boundary: int | None = None
    wall_seconds: float = 0.0


@dataclass
class AeResult:
    config: dict
    train_loss: list[float]
    val_loss: list[float]
    test_loss: float
    wall_seconds: float = 0.0


def evaluate(model: HybridModel, dataset: Dataset, subset: str, stage: Stage | None = None) -> tuple[float, float]:
    """(accuracy, mean cross-entropy) over a subset; argmax ties go to the
    lowest class index."""
    idx = dataset.subset(subset)
    if idx.size == 0:
        raise ValueError(f"subset {subset!r} is empty")
    logits, _ = model_forward(model, dataset.features[idx], stage=stage)
    targets = dataset.labels_one_hot[idx]
    loss, _ = cross_entropy_loss(logits, targets)
    accuracy = float(np.mean(logits.argmax(axis=1) == targets.argmax(axis=1)))
    return accuracy, loss


def ema_smooth(series, alpha: float = 0.6) -> np.ndarray:
    """Exponential moving average: s0 = x0, s_t = alpha*x_t + (1-alpha)*s_{t-1}."""
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("cannot smooth an empty series")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    out = np.empty_like(series)
    out[0] = series[0]
    for t in range(1, series.size):
        out[t] = alpha * series[t] + (1.0 - alpha) * out[t - 1]
    return out


def _check_finite(loss: float, context: str) -> None:
    if not math.isfinite(loss):
        raise TrainingDiverged(f"non-finite loss ({loss}) during {context}")


# ---------------------------------------------------------------------------
# autoencoder training
# ---------------------------------------------------------------------------

def _reconstruction_loss(spec: MlpSpec, features: np.ndarray, idx: np.ndarray) -> float:
    out, _ = mlp_forward(spec, features[idx])
    loss, _ = mse_loss(out, features[idx])
    return loss


def train_autoencoder(dataset: Dataset, config: TrainConfig) -> tuple[MlpSpec, MlpSpec, AeResult]:
    """Fit the reconstruction autoencoder with Adam + MSE.

    Returns ``(encoder, full autoencoder, per-epoch losses)``; the encoder is
    the trained compression half, ready to freeze inside downstream models.
    """
    start = time.perf_counter()
    gen = rng_streams.stream(config.seed, rng_streams.AE_INIT)
    auto = build_autoencoder(dataset.n_features, dataset.n_classes, gen)
    params = auto.parameter_arrays()
    optimizer = OptimizerState(OptimizerKind.ADAM, config.learning_rate)
    train_losses: list[float] = []
    val_losses: list[float] = []
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        n_batches = 0
        for idx in batches(dataset, "train", config.batch_size, config.seed, epoch):
            x = dataset.features[idx]
            out, tape = mlp_forward(auto, x)
            loss, grad = mse_loss(out, x)
            _check_finite(loss, f"autoencoder epoch {epoch}")
            grads = mlp_backward(auto, tape, grad).parameter_grads()
            optimizer_step(optimizer, params, grads)
            epoch_loss += loss
            n_batches += 1
        train_losses.append(epoch_loss / n_batches)
        val_losses.append(_reconstruction_loss(auto, dataset.features, dataset.val_idx))
    test_loss = _reconstruction_loss(auto, dataset.features, dataset.test_idx)
    result = AeResult(
        config=config_dict(config),
        train_loss=train_losses,
        val_loss=val_losses,
        test_loss=test_loss,
        wall_seconds=time.perf_counter() - start,
    )
    encoder = split_encoder(auto, dataset.n_features, dataset.n_classes)
    return encoder, auto, result


# ---------------------------------------------------------------------------
# classifier training
# ---------------------------------------------------------------------------

def _train_epochs(
    model: HybridModel,
    dataset: Dataset,
    config: TrainConfig,
    stage: Stage | None,
    epoch_offset: int,
    result: TrialResult,
) -> None:
    params = trainable_arrays(model, stage)
    optimizer = OptimizerState(config.optimizer, config.learning_rate)
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        n_batches = 0
        for idx in batches(dataset, "train", config.batch_size, config.seed, epoch_offset + epoch):
            x = dataset.features[idx]
            y = dataset.labels_one_hot[idx]
            logits, tape = model_forward(model, x, stage=stage)
            loss, grad = cross_entropy_loss(logits, y)
            _check_finite(loss, f"epoch {epoch_offset + epoch}")
            grads = model_backward(model, tape, grad, stage=stage)
            optimizer_step(optimizer, params, grads)
            epoch_loss += loss
            n_batches += 1
        result.train_loss.append(epoch_loss / n_batches)
        val_acc, val_loss = evaluate(model, dataset, "val", stage=stage)
        result.val_loss.append(val_loss)
        result.val_accuracy.append(val_acc)


def train_classifier(model: HybridModel, dataset: Dataset, config: TrainConfig) -> TrialResult:
    """Single-stage training with cross-entropy; per-epoch validation and a
    final test evaluation."""
    if model.kind in TWO_STAGE_KINDS:
        raise ValueError(f"{model.kind.value} trains in two stages; use train_two_stage")
    start = time.perf_counter()
    result = TrialResult(
        config=config_dict(config), train_loss=[], val_loss=[], val_accuracy=[], test_accuracy=0.0
    )
    _train_epochs(model, dataset, config, None, 0, result)
    result.test_accuracy = evaluate(model, dataset, "test")[0]
    result.wall_seconds = time.perf_counter() - start
    return result


def train_two_stage(model: HybridModel, dataset: Dataset, config: TrainConfig) -> TrialResult:
    """Classical stage, then quantum stage with classical weights frozen.

    Each stage runs the full configured epoch count. The surrogate-to-circuit
    swap (and the freeze) happens at the recorded stage boundary.
    """
    if model.kind not in TWO_STAGE_KINDS:
        raise ValueError(f"{model.kind.value} is a single-stage model")
    start = time.perf_counter()
    result = TrialResult(
        config=config_dict(config),
        train_loss=[],
        val_loss=[],
        val_accuracy=[],
        test_accuracy=0.0,
        stage_boundary=config.epochs,
    )
    _train_epochs(model, dataset, config, Stage.CLASSICAL, 0, result)
    _train_epochs(model, dataset, config, Stage.QUANTUM, config.epochs, result)
    result.test_accuracy = evaluate(model, dataset, "test", stage=Stage.QUANTUM)[0]
    result.wall_seconds = time.perf_counter() - start
    return result


def run_trial(
    config: TrainConfig, dataset: Dataset, encoder: MlpSpec | None = None
) -> tuple[HybridModel, TrialResult]:
    """Build the model for a config and train it to completion."""
    gen = rng_streams.stream(config.seed, rng_streams.MODEL_INIT)
    model = build_model(
        config.model,
        dataset.n_features,
        dataset.n_classes,
        gen,
        n_layers=config.vqc_layers,
        trained_encoder=encoder,
        seed=config.seed,
    )
    if config.model in TWO_STAGE_KINDS:
        result = train_two_stage(model, dataset, config)
    else:
        result = train_classifier(model, dataset, config)
    return model, result


def config_dict(config: TrainConfig) -> dict:
    payload = asdict(config)
    payload["model"] = config.model.value if config.model else None
    payload["optimizer"] = config.optimizer.value
    return payload


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Cartesian hyperparameter grid over seeds with a selection metric.

    ``target`` is ``"model"`` (classifier accuracy, maximized) or ``"ae"``
    (reconstruction loss, minimized). Axes may cover ``learning_rate`` and
    ``batch_size``; every cell runs once per seed.
    """

    target: str
    axes: dict
    seeds: tuple
    epochs: int
    model: ModelKind | None = None
    vqc_layers: int = 6
    metric: str | None = None

    def __post_init__(self):
        if self.target not in ("model", "ae"):
            raise ValueError("target must be 'model' or 'ae'")
        if self.target == "model" and self.model is None:
            raise ValueError("model grids need a model kind")
        if not self.axes or any(len(v) == 0 for v in self.axes.values()):
            raise ValueError("axes must be nonempty")
        allowed = {"learning_rate", "batch_size"}
        if set(self.axes) - allowed:
            raise ValueError(f"axes must be a subset of {allowed}")


@dataclass
class GridCell:
    values: dict
    mean_metric: float | None
    results: list
    failed: int = 0


def _grid_cells(spec: GridSpec) -> list[dict]:
    names = list(spec.axes)
    cells: list[dict] = [{}]
    for name in names:
        cells = [dict(cell, **{name: value}) for cell in cells for value in spec.axes[name]]
    return cells


def _run_grid_cell(args) -> tuple[int, int, object | None, str | None]:
    cell_index, seed_index, spec, cell_values, dataset, encoders = args
    seed = spec.seeds[seed_index]
    lr = cell_values.get("learning_rate")
    batch = cell_values.get("batch_size", 5)
    try:
        if spec.target == "ae":
            config = TrainConfig(
                model=None,
                dataset=dataset.name,
                seed=seed,
                learning_rate=lr,
                epochs=spec.epochs,
                batch_size=batch,
                optimizer=OptimizerKind.ADAM,
            )
            _, _, ae_result = train_autoencoder(dataset, config)
            return cell_index, seed_index, ae_result, None
        config = TrainConfig(
            model=spec.model,
            dataset=dataset.name,
            seed=seed,
            learning_rate=lr,
            epochs=spec.epochs,
            batch_size=batch,
            vqc_layers=spec.vqc_layers,
        )
        encoder = encoders.get(seed) if encoders else None
        _, result = run_trial(config, dataset, encoder=encoder)
        return cell_index, seed_index, result, None
    except TrainingDiverged as exc:
        return cell_index, seed_index, None, str(exc)


def grid_search(
    spec: GridSpec, dataset: Dataset, encoders: dict | None = None
) -> tuple[dict, list[GridCell]]:
    """Run every (cell, seed) pair and pick the best seed-mean metric.

    Model grids maximize mean test accuracy; AE grids minimize mean test
    reconstruction loss. Diverged runs mark the cell failed and exclude it
    from selection. Ties break toward the earlier cell in axis order, so the
    outcome does not depend on execution order or worker count.
    """
    cells = _grid_cells(spec)
    jobs = [
        (ci, si, spec, cell, dataset, encoders)
        for ci, cell in enumerate(cells)
        for si in range(len(spec.seeds))
    ]
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    outcomes: list = [None] * len(jobs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for out in pool.map(_run_grid_cell, jobs):
                outcomes[out[0] * len(spec.seeds) + out[1]] = out
    else:
        for job in jobs:
            out = _run_grid_cell(job)
            outcomes[out[0] * len(spec.seeds) + out[1]] = out

    table: list[GridCell] = [GridCell(values=cell, mean_metric=None, results=[]) for cell in cells]
    for ci, _si, result, error in outcomes:
        if error is None:
            table[ci].results.append(result)
        else:
            table[ci].failed += 1
    minimize = spec.target == "ae"
    for cell in table:
        if cell.failed or not cell.results:
            cell.mean_metric = None
            continue
        values = [
            r.test_loss if spec.target == "ae" else r.test_accuracy for r in cell.results
        ]
        cell.mean_metric = float(np.mean(values))
    best = None
    for cell in table:
        if cell.mean_metric is None:
            continue
        if best is None:
            best = cell
        elif minimize and cell.mean_metric < best.mean_metric:
            best = cell
        elif not minimize and cell.mean_metric > best.mean_metric:
            best = cell
    if best is None:
        raise TrainingDiverged("every grid cell diverged")
    return dict(best.values), table
