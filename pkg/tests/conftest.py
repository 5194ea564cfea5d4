import os
from pathlib import Path

import numpy as np
import pytest

import hqb.data as D


def data_dir() -> Path:
    """Directory holding externally supplied benchmark files (see README)."""
    return Path(os.environ.get("HQB_DATA_DIR", Path(__file__).parent / "data"))


@pytest.fixture(scope="session")
def breastcancer_prepared(tmp_path_factory) -> D.Dataset:
    """The real Breast Cancer Wisconsin table, written to canonical CSV and
    run through the package's own prepare pipeline."""
    from sklearn.datasets import load_breast_cancer

    bc = load_breast_cancer()
    root = tmp_path_factory.mktemp("breastcancer")
    csv_path = root / "breastcancer.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        for row, label in zip(bc.data, bc.target):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    return D.prepare_dataset("breastcancer", [csv_path], seed=0, out_dir=root / "prepared")


@pytest.fixture(scope="session")
def banknote_prepared(tmp_path_factory):
    """The UCI Banknote Authentication table, if supplied (not fetchable in
    offline environments); see README for where to place it."""
    for name in ("banknote_authentication.csv", "data_banknote_authentication.txt"):
        path = data_dir() / name
        if path.exists():
            root = tmp_path_factory.mktemp("banknote")
            return D.prepare_dataset("banknote", [path], seed=0, out_dir=root / "prepared")
    return None


@pytest.fixture(scope="session")
def mnist_prepared_subsample(tmp_path_factory):
    """MNIST IDX files, if supplied, subsampled to the desk-scale split
    7000 train / 1000 val / 1000 test."""
    candidates = [
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
         "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz",
         "t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"),
    ]
    base = data_dir() / "mnist"
    for names in candidates:
        paths = [base / n for n in names]
        if all(p.exists() for p in paths):
            root = tmp_path_factory.mktemp("mnist")
            return D.prepare_dataset(
                "mnist",
                paths,
                seed=0,
                out_dir=root / "prepared",
                subsample_train=8000,
                subsample_test=1000,
            )
    return None
