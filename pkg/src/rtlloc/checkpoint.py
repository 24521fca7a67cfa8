"""Checkpoint format: one JSON manifest line, then raw little-endian float64.

The manifest records parameter names and shapes (in payload order) plus
stage/seed/hyperparameter metadata; loading verifies shapes against it.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class CheckpointError(Exception):
    pass


def save_checkpoint(path, arrays: dict[str, np.ndarray], *, stage: str,
                    seed: int, hyperparameters: dict | None = None):
    names = sorted(arrays)
    manifest = {
        "format": "rtlloc-ckpt-v1",
        "stage": stage,
        "seed": seed,
        "hyperparameters": hyperparameters or {},
        "params": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        header = fh.readline()
        try:
            manifest = json.loads(header.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"bad checkpoint manifest in {path}") from e
        if manifest.get("format") != "rtlloc-ckpt-v1":
            raise CheckpointError(f"unrecognized checkpoint format in {path}")
        arrays: dict[str, np.ndarray] = {}
        for rec in manifest["params"]:
            shape = tuple(rec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise CheckpointError(
                    f"truncated payload for {rec['name']!r} in {path}")
            arrays[rec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return manifest, arrays
