"""Binary PGM (P5, maxval 255) read/write for page rasters."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ielab.errors import DataValidationError


def write_pgm(path, grid: np.ndarray) -> None:
    arr = np.asarray(grid)
    if arr.ndim != 2:
        raise DataValidationError(f"PGM grids are 2-D, got shape {arr.shape}")
    arr = arr.astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    parts = blob.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5":
        raise DataValidationError(f"{path}: not a binary P5 PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise DataValidationError(f"{path}: expected maxval 255, got {maxval}")
    data = parts[4][:w * h]
    if len(data) != w * h:
        raise DataValidationError(f"{path}: truncated pixel payload")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def raster_to_input(grid: np.ndarray) -> np.ndarray:
    """(H, W) uint8 page -> (1, H, W) float64 ink intensity in [0, 1]."""
    return ((255.0 - np.asarray(grid, dtype=np.float64)) / 255.0)[None, :, :]
