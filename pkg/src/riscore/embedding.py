"""Embedding matrices, the REMB binary file format, and similarity scoring.

Embeddings are stored on disk as 32-bit floats (typical encoder output
precision) but held in memory as float64 so that normalization and softmax
arithmetic stay stable at low temperatures.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    IndexLengthMismatch,
    IoFailure,
    NonNormalizedInput,
    TruncatedPayload,
    ZeroNormRow,
)

# magic, version, normalized flag, 2 reserved zero bytes, rows u32, dim u32
_HEADER = struct.Struct("<4sBBxxII")
_MAGIC = b"REMB"
_VERSION = 1

# Rows whose norm is already this close to 1 are left untouched, which makes
# normalization idempotent and keeps float32 round-trips byte-exact.
_NORM_SKIP_TOL = 1e-6


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-major embedding vectors with one string key per row."""

    data: np.ndarray
    index: tuple[str, ...]
    normalized: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("embedding data must be 2-D")
        if data.shape[1] < 1:
            raise DimMismatch("embedding dim must be positive")
        if not np.all(np.isfinite(data)):
            raise ValueError("embedding data contains NaN/Inf")
        index = tuple(str(k) for k in self.index)
        if len(index) != data.shape[0]:
            raise IndexLengthMismatch(
                f"index has {len(index)} keys for {data.shape[0]} rows"
            )
        if len(set(index)) != len(index):
            raise ValueError("index keys must be unique")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "index", index)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def row_of(self, key: str) -> int:
        return self.index.index(key)


@dataclass(frozen=True)
class SimilarityParams:
    tau: float = 0.01

    def __post_init__(self):
        if not (self.tau > 0):
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class ScoreMatrix:
    """Per-item per-class scores, entries in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("score values must be 2-D")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("score entries must lie in [0, 1]")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        return self.values.shape[1]


def l2_normalize(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit L2 norm; rows already at norm 1 are untouched."""
    norms = np.linalg.norm(matrix.data, axis=1)
    small = np.flatnonzero(norms < 1e-12)
    if small.size:
        raise ZeroNormRow(int(small[0]))
    data = matrix.data.copy()
    off = np.abs(norms - 1.0) > _NORM_SKIP_TOL
    data[off] = data[off] / norms[off, None]
    return EmbeddingMatrix(data=data, index=matrix.index, normalized=True)


def save_embeddings(matrix: EmbeddingMatrix, path) -> None:
    """Write a REMB binary file plus the ``path + ".idx"`` sidecar index."""
    header = _HEADER.pack(
        _MAGIC, _VERSION, 1 if matrix.normalized else 0, matrix.rows, matrix.dim
    )
    payload = np.ascontiguousarray(matrix.data, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        with open(str(path) + ".idx", "w", encoding="utf-8") as fh:
            for key in matrix.index:
                fh.write(key + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_embeddings(path) -> EmbeddingMatrix:
    """Read a REMB file; rows are normalized eagerly unless the header says
    the exporter already did."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise BadMagic(f"{path}: file shorter than header")
    magic, version, norm_flag, rows, dim = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    if dim == 0:
        raise DimMismatch(f"{path}: header declares dim=0")
    expected = rows * dim * 4
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: expected {expected} payload bytes, found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, dim).astype(np.float64)

    with open(str(path) + ".idx", "r", encoding="utf-8") as fh:
        keys = fh.read().splitlines()
    if len(keys) != rows:
        raise IndexLengthMismatch(
            f"{path}.idx: {len(keys)} keys for {rows} rows"
        )
    matrix = EmbeddingMatrix(data=data, index=tuple(keys), normalized=bool(norm_flag))
    if not norm_flag and rows > 0:
        matrix = l2_normalize(matrix)
    return matrix


def _check_normalized(matrix: EmbeddingMatrix, name: str) -> None:
    if matrix.rows == 0:
        return
    norms = np.linalg.norm(matrix.data, axis=1)
    if np.abs(norms - 1.0).max() > 1e-4:
        raise NonNormalizedInput(f"{name} rows are not unit-norm")


def similarity_scores(
    image_embs: EmbeddingMatrix,
    text_embs: EmbeddingMatrix,
    params: SimilarityParams,
) -> ScoreMatrix:
    """Temperature softmax over image-text dot products.

    Row i, column k is exp(I[i].T[k]/tau) normalized over k.  The per-row max
    is subtracted before exponentiation: at tau=0.01 the raw exponents reach
    +-100 and would overflow otherwise.
    """
    if image_embs.dim != text_embs.dim:
        raise DimMismatch(
            f"image dim {image_embs.dim} != text dim {text_embs.dim}"
        )
    _check_normalized(image_embs, "image embeddings")
    _check_normalized(text_embs, "text embeddings")
    if image_embs.rows == 0:
        return ScoreMatrix(np.zeros((0, text_embs.rows)))
    logits = (image_embs.data @ text_embs.data.T) / params.tau
    logits -= logits.max(axis=1, keepdims=True)
    expd = np.exp(logits)
    return ScoreMatrix(expd / expd.sum(axis=1, keepdims=True))
