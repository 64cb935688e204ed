"""Raster ("grid field") and observation-vector file I/O.

A grid field is a plain 2-D float64 array, row 0 = northernmost row. Two
on-disk forms are supported:

* text: first line ``GFLD <rows> <cols>``, then one whitespace-separated
  line of decimal values per row;
* binary: magic ``GFLB``, little-endian uint32 rows and cols, then
  rows*cols float64 values in row-major order.

Observation vectors are CSV files with the header ``index,value``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

TEXT_MAGIC = "GFLD"
BINARY_MAGIC = b"GFLB"


def as_field(values) -> np.ndarray:
    """Validate and return a 2-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"grid field must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"grid field must be non-empty, got shape {arr.shape}")
    return arr


def write_gridfield(path, field, binary: bool = False) -> None:
    field = as_field(field)
    rows, cols = field.shape
    path = Path(path)
    if binary:
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<II", rows, cols))
            fh.write(field.astype("<f8", copy=False).tobytes(order="C"))
    else:
        with open(path, "w") as fh:
            fh.write(f"{TEXT_MAGIC} {rows} {cols}\n")
            for r in range(rows):
                fh.write(" ".join(repr(float(v)) for v in field[r]) + "\n")


def read_gridfield(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        return _read_binary(path)
    if head == TEXT_MAGIC.encode():
        return _read_text(path)
    raise ValueError(f"{path}: not a grid-field file (bad magic {head!r})")


def _read_binary(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        fh.read(4)
        rows, cols = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated binary grid field")
    return data.reshape(rows, cols).astype(np.float64)


def _read_text(path: Path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != TEXT_MAGIC:
            raise ValueError(f"{path}: malformed grid-field header")
        rows, cols = int(header[1]), int(header[2])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        raise ValueError(
            f"{path}: header says {rows}x{cols}, body is {data.shape[0]}x{data.shape[1]}"
        )
    return data


def write_observations(path, values) -> None:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"observation vector must be 1-D, got shape {values.shape}")
    with open(path, "w") as fh:
        fh.write("index,value\n")
        for i, v in enumerate(values):
            fh.write(f"{i},{float(v)!r}\n")


def read_observations(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "index,value":
            raise ValueError(f"{path}: expected 'index,value' header, got {header!r}")
        out = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            idx, val = line.split(",")
            out.append((int(idx), float(val)))
    out.sort()
    if [i for i, _ in out] != list(range(len(out))):
        raise ValueError(f"{path}: observation indices are not 0..n-1")
    return np.array([v for _, v in out], dtype=np.float64)


def write_matrix(path, matrix) -> None:
    """Persist a 2-D matrix reusing the grid-field text form."""
    write_gridfield(path, matrix)
