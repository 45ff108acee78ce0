"""Checkpoint files: a JSON manifest of parameter names, shapes, and
little-endian float64 payloads (base64). The version field is mandatory.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, params: dict[str, np.ndarray], meta: dict | None = None) -> None:
    obj = {
        "version": FORMAT_VERSION,
        "dtype": "<f8",
        "meta": meta or {},
        "params": {
            name: {
                "shape": list(arr.shape),
                "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii"),
            }
            for name, arr in params.items()
        },
    }
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    obj = json.loads(Path(path).read_text())
    version = obj.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    params = {}
    for name, entry in obj["params"].items():
        raw = base64.b64decode(entry["data"])
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()
    return params, obj.get("meta", {})


def params_checksum(params: dict[str, np.ndarray]) -> str:
    """Order-independent digest of parameter contents (for freeze assertions)."""
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name], dtype="<f8").tobytes())
    return h.hexdigest()
