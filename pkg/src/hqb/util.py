"""Small shared helpers: file hashing, JSON manifests, version stamps."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .kernels import BACKEND, HAS_NUMBA
from .rng import ALGORITHM


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def environment_stamp() -> dict:
    stamp = {
        "hqb": __version__,
        "numpy": np.__version__,
        "rng": ALGORITHM,
        "kernels": BACKEND,
    }
    if HAS_NUMBA:
        import numba

        stamp["numba"] = numba.__version__
    return stamp


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)
