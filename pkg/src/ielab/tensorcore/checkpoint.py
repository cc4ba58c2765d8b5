"""Single-file parameter container.

Layout (documented contract, stable across releases):

  * line 1: compact UTF-8 JSON followed by a single ``\\n``:
      {"format": "ielab-checkpoint", "format_version": 1,
       "config": <caller-supplied JSON object>,
       "manifest": [{"name": str, "shape": [int, ...], "offset": int}, ...]}
    The manifest is sorted by name; offsets are byte positions into the
    payload that starts immediately after the newline.
  * payload: each parameter's elements as little-endian float64, row-major,
    concatenated in manifest order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ielab.errors import CheckpointMismatchError
from ielab.tensorcore.engine import Tensor

FORMAT_NAME = "ielab-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(path, config: dict, params: dict) -> None:
    names = sorted(params)
    manifest = []
    offset = 0
    payload = []
    for name in names:
        t = params[name]
        arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        payload.append(raw)
        offset += len(raw)
    header = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": config,
        "manifest": manifest,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True,
                            separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        for raw in payload:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    nl = blob.find(b"\n")
    if nl < 0:
        raise CheckpointMismatchError(f"{path}: missing checkpoint header")
    try:
        header = json.loads(blob[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointMismatchError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format") != FORMAT_NAME:
        raise CheckpointMismatchError(f"{path}: not an {FORMAT_NAME} file")
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointMismatchError(
            f"{path}: unsupported format_version {header.get('format_version')}")
    payload = blob[nl + 1:]
    params = {}
    for entry in header["manifest"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        stop = start + count * 8
        if stop > len(payload):
            raise CheckpointMismatchError(
                f"{path}: truncated payload for parameter '{entry['name']}'")
        arr = np.frombuffer(payload[start:stop], dtype="<f8").astype(np.float64)
        params[entry["name"]] = arr.reshape(shape)
    return header["config"], params
