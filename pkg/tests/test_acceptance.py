"""Paper-number reproduction suite.

Each test prints one ``criterion N: PASS/BLOCKED`` line (run with ``-s`` or
``-rA`` to see them). Criteria needing the Banknote or MNIST source files
skip with a BLOCKED line when the files are absent; place them under
``$HQB_DATA_DIR`` (see README) to run those criteria too.
"""

import time

import numpy as np
import pytest

import hqb.data as D
import hqb.experiment as E
import hqb.models as M
import hqb.neural as nn
import hqb.quantum as q
import hqb.report as rep
from hqb.experiment import TrainConfig
from hqb.models import ModelKind

from oracles import dense_forward, fd_loss_gradients, fd_mlp_gradients

pytestmark = pytest.mark.acceptance

SEEDS_FINAL = range(10)
SEEDS_AE = range(5)

# best learning rate per (dataset, model) from the grid-search stage
BEST_LR = {
    "banknote": {"ae-vqc": 0.01, "vqc-amplitude": 0.01, "dqc": 0.1, "sequent": 0.1, "ae-nn": 0.1, "nn": 0.1},
    "breastcancer": {"ae-vqc": 0.1, "vqc-amplitude": 0.01, "dqc": 0.1, "sequent": 0.1, "ae-nn": 0.1, "nn": 0.1},
    "mnist": {"ae-vqc": 0.01, "vqc-amplitude": 0.01, "dqc": 0.01, "sequent": 0.001, "ae-nn": 0.01, "nn": 0.1},
}
AE_HYPERPARAMS = {"banknote": (0.1, 128), "breastcancer": (0.01, 32), "mnist": (0.001, 64)}
CLASSIFIER_EPOCHS = {"banknote": 100, "breastcancer": 100, "mnist": 20}
AE_EPOCHS = 500


def train_ae(dataset: D.Dataset, seed: int) -> tuple:
    lr, batch = AE_HYPERPARAMS[dataset.name]
    config = TrainConfig(
        model=None, dataset=dataset.name, seed=seed,
        learning_rate=lr, epochs=AE_EPOCHS, batch_size=batch,
    )
    return E.train_autoencoder(dataset, config)


def run_model(dataset: D.Dataset, model_name: str, seed: int, encoder, epochs: int):
    config = TrainConfig(
        model=ModelKind(model_name), dataset=dataset.name, seed=seed,
        learning_rate=BEST_LR[dataset.name][model_name], epochs=epochs, batch_size=5,
    )
    _, result = E.run_trial(config, dataset, encoder=encoder)
    return result


def run_all_models(dataset: D.Dataset, seeds, autoencoders, models=tuple(k.value for k in ModelKind)):
    epochs = CLASSIFIER_EPOCHS[dataset.name]
    accuracies = {name: [] for name in models}
    for seed in seeds:
        encoder = autoencoders[seed][0]
        for name in models:
            enc = encoder if ModelKind(name) in M.ENCODER_KINDS else None
            accuracies[name].append(run_model(dataset, name, seed, enc, epochs).test_accuracy)
    return {name: np.asarray(vals) for name, vals in accuracies.items()}


def report(criterion: str, message: str) -> None:
    print(f"\ncriterion {criterion}: {message}")


def blocked(criterion: str, what: str) -> None:
    report(criterion, f"BLOCKED (data unavailable): {what}; see README for how to supply it")
    pytest.skip(f"criterion {criterion} blocked: {what} not available in this environment")


# ---------------------------------------------------------------------------
# shared heavy fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bc_autoencoders(breastcancer_prepared):
    return {seed: train_ae(breastcancer_prepared, seed) for seed in SEEDS_FINAL}


@pytest.fixture(scope="module")
def bc_accuracies(breastcancer_prepared, bc_autoencoders):
    return run_all_models(breastcancer_prepared, SEEDS_FINAL, bc_autoencoders)


@pytest.fixture(scope="module")
def banknote_autoencoders(banknote_prepared):
    if banknote_prepared is None:
        return None
    return {seed: train_ae(banknote_prepared, seed) for seed in SEEDS_FINAL}


@pytest.fixture(scope="module")
def banknote_accuracies(banknote_prepared, banknote_autoencoders):
    if banknote_prepared is None:
        return None
    return run_all_models(banknote_prepared, SEEDS_FINAL, banknote_autoencoders)


# ---------------------------------------------------------------------------
# criterion 1: Banknote accuracy table
# ---------------------------------------------------------------------------

BANKNOTE_TARGETS = {
    "nn": (0.991, 0.05),
    "dqc": (0.994, 0.05),
    "sequent": (0.979, 0.05),
    "vqc-amplitude": (0.847, 0.05),
    "ae-vqc": (0.787, 0.05),
    "ae-nn": (0.699, 0.10),
}


def test_criterion_1_banknote_accuracies(banknote_accuracies):
    if banknote_accuracies is None:
        blocked("1", "Banknote Authentication CSV")
    lines = []
    for name, (target, tol) in BANKNOTE_TARGETS.items():
        mean = banknote_accuracies[name].mean()
        lines.append(f"{name} {mean:.3f} (target {target}+-{tol})")
        assert abs(mean - target) <= tol, f"{name}: mean {mean:.4f} outside {target}+-{tol}"
    report("1", "PASS " + "; ".join(lines))


# ---------------------------------------------------------------------------
# criterion 2: Breast Cancer accuracy table
# ---------------------------------------------------------------------------

BREASTCANCER_TARGETS = {
    "nn": (0.974, 0.05),
    "dqc": (0.972, 0.05),
    "sequent": (0.972, 0.05),
    "vqc-amplitude": (0.849, 0.06),
    "ae-vqc": (0.816, 0.12),
    "ae-nn": (0.833, 0.12),
}


def test_criterion_2_breastcancer_accuracies(bc_accuracies):
    lines = []
    for name, (target, tol) in BREASTCANCER_TARGETS.items():
        mean = bc_accuracies[name].mean()
        lines.append(f"{name} {mean:.3f} (target {target}+-{tol})")
        assert abs(mean - target) <= tol, f"{name}: mean {mean:.4f} outside {target}+-{tol}"
    report("2", "PASS " + "; ".join(lines))


# ---------------------------------------------------------------------------
# criterion 3: autoencoder reconstruction losses
# ---------------------------------------------------------------------------

def test_criterion_3_breastcancer_reconstruction(bc_autoencoders):
    losses = [bc_autoencoders[seed][2].test_loss for seed in SEEDS_AE]
    mean = float(np.mean(losses))
    assert mean <= 0.012, f"Breast Cancer AE mean test MSE {mean:.5f} > 0.012"
    report("3 (breast cancer)", f"PASS mean test reconstruction MSE {mean:.5f} <= 0.012")


def test_criterion_3_banknote_reconstruction(banknote_autoencoders):
    if banknote_autoencoders is None:
        blocked("3 (banknote)", "Banknote Authentication CSV")
    losses = [banknote_autoencoders[seed][2].test_loss for seed in SEEDS_AE]
    mean = float(np.mean(losses))
    assert mean <= 0.006, f"Banknote AE mean test MSE {mean:.5f} > 0.006"
    report("3 (banknote)", f"PASS mean test reconstruction MSE {mean:.5f} <= 0.006")


# ---------------------------------------------------------------------------
# criterion 4: qualitative ordering
# ---------------------------------------------------------------------------

def _check_ordering(accuracies) -> str:
    classical = {name: accuracies[name].mean() for name in ("nn", "dqc", "sequent")}
    compressed = {name: accuracies[name].mean() for name in ("ae-vqc", "vqc-amplitude")}
    for c_name, c_mean in classical.items():
        for q_name, q_mean in compressed.items():
            assert c_mean > q_mean, f"{c_name} ({c_mean:.3f}) not above {q_name} ({q_mean:.3f})"
    gap = abs(compressed["ae-vqc"] - compressed["vqc-amplitude"])
    assert gap <= 0.07, f"|ae-vqc - vqc-amplitude| = {gap:.3f} > 0.07"
    return (
        f"{{nn,dqc,sequent}} all above {{ae-vqc,vqc-amplitude}}; "
        f"|ae-vqc - vqc-amplitude| = {gap:.3f} <= 0.07"
    )


def test_criterion_4_ordering_breastcancer(bc_accuracies):
    report("4 (breast cancer)", "PASS " + _check_ordering(bc_accuracies))


def test_criterion_4_ordering_banknote(banknote_accuracies):
    if banknote_accuracies is None:
        blocked("4 (banknote)", "Banknote Authentication CSV")
    report("4 (banknote)", "PASS " + _check_ordering(banknote_accuracies))


# ---------------------------------------------------------------------------
# criterion 5: the raw encoder does not classify
# ---------------------------------------------------------------------------

def _encoder_argmax_accuracy(dataset: D.Dataset, encoder) -> float:
    idx = dataset.test_idx
    out, _ = nn.mlp_forward(encoder, dataset.features[idx])
    truth = dataset.labels_one_hot[idx].argmax(axis=1)
    return float(np.mean(out.argmax(axis=1) == truth))


def test_criterion_5_encoder_does_not_classify_binary(breastcancer_prepared, bc_autoencoders):
    accs = [
        _encoder_argmax_accuracy(breastcancer_prepared, bc_autoencoders[seed][0])
        for seed in SEEDS_FINAL
    ]
    mean = float(np.mean(accs))
    # one-sided: must not beat chance by more than 0.15 on 2 classes
    assert mean <= 0.65, f"raw encoder argmax accuracy {mean:.3f} beats chance margin"
    report("5 (2-class)", f"PASS raw-encoder argmax accuracy {mean:.3f} <= 0.65")


def test_criterion_5_encoder_does_not_classify_ten_class(mnist_prepared_subsample):
    if mnist_prepared_subsample is None:
        blocked("5 (10-class)", "MNIST IDX files")
    accs = []
    for seed in range(3):
        encoder, _, _ = train_ae(mnist_prepared_subsample, seed)
        accs.append(_encoder_argmax_accuracy(mnist_prepared_subsample, encoder))
    mean = float(np.mean(accs))
    assert mean <= 0.25, f"raw encoder argmax accuracy {mean:.3f} > 0.25 on 10 classes"
    report("5 (10-class)", f"PASS raw-encoder argmax accuracy {mean:.3f} <= 0.25")


# ---------------------------------------------------------------------------
# criterion 6: MNIST subsample property checks
# ---------------------------------------------------------------------------

def test_criterion_6_mnist_subsample(mnist_prepared_subsample):
    if mnist_prepared_subsample is None:
        blocked("6", "MNIST IDX files")
    ds = mnist_prepared_subsample
    assert (ds.train_idx.size, ds.val_idx.size, ds.test_idx.size) == (7000, 1000, 1000)
    start = time.perf_counter()
    autoencoders = {seed: train_ae(ds, seed) for seed in range(3)}
    accs = run_all_models(
        ds, range(3), autoencoders, models=("nn", "ae-nn", "ae-vqc", "vqc-amplitude")
    )
    elapsed = time.perf_counter() - start
    means = {name: vals.mean() for name, vals in accs.items()}
    assert means["nn"] >= 0.90, f"nn mean {means['nn']:.3f} < 0.90"
    assert means["ae-nn"] >= 0.60, f"ae-nn mean {means['ae-nn']:.3f} < 0.60"
    assert means["ae-vqc"] > 0.20, f"ae-vqc mean {means['ae-vqc']:.3f} <= 0.20"
    assert means["vqc-amplitude"] > 0.20, f"vqc-amplitude mean {means['vqc-amplitude']:.3f} <= 0.20"
    assert elapsed < 3600, f"runtime {elapsed:.0f}s exceeds one hour"
    report(
        "6",
        "PASS "
        + "; ".join(f"{k} {v:.3f}" for k, v in means.items())
        + f"; runtime {elapsed:.0f}s < 3600s",
    )


# ---------------------------------------------------------------------------
# module invariant tied to criterion 1's dataset: the parameter-matched
# network converges visibly fast on Banknote
# ---------------------------------------------------------------------------

def test_banknote_nn_convergence_invariant(banknote_prepared):
    if banknote_prepared is None:
        blocked("1 (nn convergence invariant)", "Banknote Authentication CSV")
    for seed in SEEDS_FINAL:
        config = TrainConfig(
            model=ModelKind.NN, dataset="banknote", seed=seed, learning_rate=0.1, epochs=30
        )
        _, result = E.run_trial(config, banknote_prepared)
        best = max(result.val_accuracy)
        assert best > 0.9, f"seed {seed}: best val accuracy {best:.3f} within 30 epochs"
    report("1 (nn convergence invariant)", "PASS val accuracy > 0.9 within 30 epochs, seeds 0-9")


# ---------------------------------------------------------------------------
# criterion 7: gradient oracle suite
# ---------------------------------------------------------------------------

def test_criterion_7_gradient_oracles():
    rng = np.random.default_rng(1234)
    for trial in range(100):
        n = int(rng.integers(1, 5))
        layers = int(rng.integers(0, 4))
        if trial % 2 == 0:
            embedding = q.Embedding.ANGLE
            features = rng.uniform(0.05, 0.95, int(rng.integers(1, n + 1)))
        else:
            embedding = q.Embedding.AMPLITUDE
            low = (1 << (n - 1)) + 1 if n > 1 else 1
            features = rng.normal(size=int(rng.integers(low, (1 << n) + 1)))
            if np.linalg.norm(features) < 0.1:
                features = features + 1.0
        spec = q.CircuitSpec(n, layers, rng.uniform(-1.5, 1.5, n * layers), embedding)
        upstream = rng.normal(size=n)
        adj = q.circuit_gradients(spec, features, upstream, method="adjoint")
        shift = q.circuit_gradients(spec, features, upstream, method="parameter-shift")
        fd_w, fd_x = fd_loss_gradients(spec, features, upstream)
        np.testing.assert_allclose(adj.d_weights, shift.d_weights, atol=1e-8)
        np.testing.assert_allclose(adj.d_input, shift.d_input, atol=1e-8)
        np.testing.assert_allclose(adj.d_weights, fd_w, atol=1e-5)
        np.testing.assert_allclose(adj.d_input, fd_x, atol=1e-5)

    for trial in range(50):
        n_layers = int(rng.integers(1, 4))
        dims = [int(rng.integers(1, 9)) for _ in range(n_layers + 1)]
        choices = [nn.Activation.RELU, nn.Activation.SIGMOID, nn.Activation.NONE]
        acts = [choices[int(rng.integers(0, 3))] for _ in range(n_layers)]
        spec = nn.build_mlp(dims, acts, rng)
        x = rng.normal(size=(2, dims[0]))
        target = rng.normal(size=(2, dims[-1]))

        def loss_fn():
            out, _ = nn.mlp_forward(spec, x)
            return nn.mse_loss(out, target)[0]

        out, tape = nn.mlp_forward(spec, x)
        _, grad = nn.mse_loss(out, target)
        grads = nn.mlp_backward(spec, tape, grad).parameter_grads()
        fd = fd_mlp_gradients(spec, loss_fn)
        for got, expected in zip(grads, fd):
            scale = np.maximum(np.abs(expected), 1.0)
            np.testing.assert_allclose(got / scale, expected / scale, atol=1e-5)
    report("7", "PASS 100 circuits and 50 networks: adjoint = parameter-shift = finite differences")


# ---------------------------------------------------------------------------
# criterion 8: brute-force unitary oracle
# ---------------------------------------------------------------------------

def test_criterion_8_dense_matrix_oracle():
    rng = np.random.default_rng(4321)
    checked = 0
    for n in (1, 2, 3):
        for layers in (0, 1, 2, 3):
            for embedding in (q.Embedding.ANGLE, q.Embedding.AMPLITUDE):
                for _ in range(4):
                    spec = q.CircuitSpec(
                        n, layers, rng.uniform(-2, 2, n * layers), embedding
                    )
                    if embedding is q.Embedding.ANGLE:
                        features = rng.uniform(0, 1, int(rng.integers(1, n + 1)))
                    else:
                        low = (1 << (n - 1)) + 1 if n > 1 else 1
                        features = rng.normal(size=int(rng.integers(low, (1 << n) + 1)))
                        if np.linalg.norm(features) < 0.1:
                            features = features + 1.0
                    np.testing.assert_allclose(
                        q.circuit_forward(spec, features),
                        dense_forward(spec, features),
                        atol=1e-10,
                    )
                    checked += 1
    report("8", f"PASS {checked} circuits match the dense-matrix simulation within 1e-10")


# ---------------------------------------------------------------------------
# criterion 9: determinism of results.csv rows
# ---------------------------------------------------------------------------

def test_criterion_9_byte_identical_results(breastcancer_prepared, tmp_path):
    config = TrainConfig(
        model=ModelKind.NN, dataset="breastcancer", seed=7, learning_rate=0.1, epochs=5
    )
    paths = []
    for run in ("first", "second"):
        _, result = E.run_trial(config, breastcancer_prepared)
        out = tmp_path / run
        rep.save_trial(result, out)
        rep.write_results_csv(rep.load_trials([out]), out / "results.csv")
        paths.append(out / "results.csv")
    first, second = (p.read_bytes() for p in paths)
    assert first == second, "repeated (config, seed) run changed results.csv bytes"
    report("9", "PASS repeated (config, seed) run produced byte-identical results.csv rows")


# ---------------------------------------------------------------------------
# criterion 10: parameter-count oracles for all four datasets
# ---------------------------------------------------------------------------

def _hand_count(dims) -> int:
    return sum(o * i + o for i, o in zip(dims, dims[1:]))


def test_criterion_10_parameter_matching():
    rng = np.random.default_rng(9)
    # hand-count fixtures per dataset: (input_dim, n_classes)
    datasets = {"banknote": (4, 2), "breastcancer": (30, 2), "mnist": (784, 10), "audiomnist": (784, 10)}
    expected_hidden = {}
    for name, (input_dim, n_classes) in datasets.items():
        enc = M.build_encoder_dims(input_dim, n_classes)
        dec = list(reversed(enc))
        n_total = _hand_count(enc) + _hand_count(dec) + 6 * n_classes
        expected_hidden[name] = max(
            int(np.ceil((n_total - n_classes) / (input_dim + n_classes + 1))), 1
        )
    assert expected_hidden["banknote"] == 5
    assert expected_hidden["breastcancer"] == 39
    assert expected_hidden["mnist"] == expected_hidden["audiomnist"] == 1034

    for name, (input_dim, n_classes) in datasets.items():
        # NN sized from the full reference budget
        model = M.build_model(ModelKind.NN, input_dim, n_classes, rng)
        assert model.head.layers[0].out_dim == expected_hidden[name], name
        enumerated = sum(a.size for a in M.trainable_arrays(model))
        assert M.trainable_parameter_count(model) == enumerated
        # AE+NN sized from the circuit-only budget
        aenn_hidden = max(
            int(np.ceil((6 * n_classes - n_classes) / (n_classes + n_classes + 1))), 1
        )
        encoder = M.split_encoder(
            M.build_autoencoder(input_dim, n_classes, rng), input_dim, n_classes
        )
        aenn = M.build_model(ModelKind.AE_NN, input_dim, n_classes, rng, trained_encoder=encoder)
        assert aenn.head.layers[0].out_dim == aenn_hidden, name
        # every kind: count equals brute-force array enumeration
        for kind in ModelKind:
            model = M.build_model(
                kind, input_dim, n_classes, rng,
                trained_encoder=encoder if kind in M.ENCODER_KINDS else None,
            )
            stages = (
                [M.Stage.CLASSICAL, M.Stage.QUANTUM] if kind in M.TWO_STAGE_KINDS else [None]
            )
            for stage in stages:
                enumerated = sum(a.size for a in M.trainable_arrays(model, stage))
                assert M.trainable_parameter_count(model, stage) == enumerated, (name, kind)
    report("10", "PASS hidden widths (5/39/1034/1034) and all trainable counts match enumeration")
