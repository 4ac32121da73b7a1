"""Shared embedding file format: binary (magic "SEMC") plus a CSV debug form.

Binary layout, little-endian:
    magic     4 bytes  b"SEMC"
    version   u32      currently 1
    count     u64
    dim       u32
    coords    count*dim float32   (raw; loader L2-normalizes)
    tok_lens  count u32
    tags      count u32           (optional trailing block)

CSV debug rows: id, token_len, source, then dim comma-joined floats.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import normalize

MAGIC = b"SEMC"
VERSION = 1
_HEADER = struct.Struct("<4sIQI")


class EmbeddingFileError(ValueError):
    pass


@dataclass
class EmbeddingSet:
    """Loaded embedding file: unit-norm coords plus token lengths and tags."""

    coords: np.ndarray                 # (count, dim) float64, unit rows
    token_lengths: np.ndarray          # (count,) int64
    source_tags: np.ndarray | None = None
    source_names: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def write_embedding_file(
    path: str | Path,
    coords: np.ndarray,
    token_lengths: np.ndarray,
    source_tags: np.ndarray | None = None,
) -> None:
    coords = np.atleast_2d(np.asarray(coords))
    count, dim = coords.shape
    token_lengths = np.asarray(token_lengths)
    if token_lengths.shape != (count,):
        raise EmbeddingFileError("token_lengths length must match embedding count")
    if np.any(token_lengths < 0):
        raise EmbeddingFileError("token lengths must be nonnegative")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, count, dim))
        f.write(coords.astype("<f4").tobytes(order="C"))
        f.write(token_lengths.astype("<u4").tobytes())
        if source_tags is not None:
            source_tags = np.asarray(source_tags)
            if source_tags.shape != (count,):
                raise EmbeddingFileError("source_tags length must match embedding count")
            f.write(source_tags.astype("<u4").tobytes())


def load_embedding_file(path: str | Path) -> EmbeddingSet:
    """Load either the binary format or the CSV debug format (by sniffing magic)."""
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(4)
    if head == MAGIC:
        return _load_binary(path)
    return _load_csv(path)


def _load_binary(path: Path) -> EmbeddingSet:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise EmbeddingFileError(f"{path}: truncated header")
    magic, version, count, dim = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise EmbeddingFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise EmbeddingFileError(f"{path}: unsupported version {version}")
    off = _HEADER.size
    need_coords = count * dim * 4
    need_lens = count * 4
    if len(raw) < off + need_coords + need_lens:
        raise EmbeddingFileError(f"{path}: truncated body")
    coords = np.frombuffer(raw, dtype="<f4", count=count * dim, offset=off).reshape(count, dim)
    off += need_coords
    lens = np.frombuffer(raw, dtype="<u4", count=count, offset=off).astype(np.int64)
    off += need_lens
    tags = None
    if len(raw) >= off + count * 4 and count > 0:
        tags = np.frombuffer(raw, dtype="<u4", count=count, offset=off).astype(np.int64)
    return EmbeddingSet(
        coords=normalize(coords.astype(np.float64)),
        token_lengths=lens,
        source_tags=tags,
    )


def _load_csv(path: Path) -> EmbeddingSet:
    rows: list[list[str]] = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if row and not row[0].startswith("#"):
                rows.append(row)
    if not rows:
        raise EmbeddingFileError(f"{path}: empty CSV")
    coords, lens, names = [], [], []
    for row in rows:
        if len(row) < 4:
            raise EmbeddingFileError(f"{path}: CSV row needs id, token_len, source, floats...")
        lens.append(int(row[1]))
        names.append(row[2])
        coords.append([float(v) for v in row[3:]])
    arr = np.asarray(coords, dtype=np.float64)
    uniq = sorted(set(names))
    tag_of = {s: i for i, s in enumerate(uniq)}
    tags = np.asarray([tag_of[s] for s in names], dtype=np.int64)
    return EmbeddingSet(
        coords=normalize(arr),
        token_lengths=np.asarray(lens, dtype=np.int64),
        source_tags=tags,
        source_names=uniq,
    )
