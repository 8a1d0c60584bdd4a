"""Writer for the RISF-EMB binary embedding format.

Layout: bytes 0-3 magic ASCII "REMB"; byte 4 version = 1; byte 5
normalized flag (0/1); bytes 6-7 reserved zero; bytes 8-11 row count as
little-endian u32; bytes 12-15 dimension as little-endian u32; then
rows x dim little-endian float32, row-major.  A sidecar at path + ".idx"
holds one UTF-8 key per line, line i naming row i.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DuplicateKey

_HEADER = struct.Struct("<4sBBxxII")
_MAGIC = b"REMB"
_VERSION = 1


def write_remb(path, data: np.ndarray, index: list[str], normalized: bool) -> None:
    """Write an embedding matrix plus its sidecar index file."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ValueError("embedding data must be 2-D")
    rows, dim = data.shape
    if len(index) != rows:
        raise ValueError(f"index has {len(index)} keys for {rows} rows")
    if len(set(index)) != len(index):
        raise DuplicateKey("sidecar keys must be unique")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, int(normalized), rows, dim))
        fh.write(data.tobytes(order="C"))
    with open(str(path) + ".idx", "w", encoding="utf-8") as fh:
        for key in index:
            fh.write(key + "\n")


def l2_normalize(data: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ValueError("cannot normalize a zero row")
    return data / norms
