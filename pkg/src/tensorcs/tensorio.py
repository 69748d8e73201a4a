"""File formats: DTF1 binary tensors, CSV matrices, and 8-bit P5 PGM images.

DTF1 layout: magic bytes ``DTF1``, u32 little-endian mode count d,
d u32 little-endian dimensions, then prod(dims) f64 little-endian values
with the first mode index varying fastest.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

_MAGIC = b"DTF1"


def write_dtf1(path, x) -> None:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 1:
        x = x.reshape(1)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", x.ndim))
        fh.write(struct.pack(f"<{x.ndim}I", *x.shape))
        fh.write(np.ravel(x, order="F").astype("<f8").tobytes())


def read_dtf1(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: missing DTF1 magic")
    (d,) = struct.unpack_from("<I", data, 4)
    if d < 1:
        raise ValueError(f"{path}: invalid mode count {d}")
    dims = struct.unpack_from(f"<{d}I", data, 8)
    n = math.prod(dims)
    offset = 8 + 4 * d
    if len(data) != offset + 8 * n:
        raise ValueError(f"{path}: truncated or oversized DTF1 payload")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=offset)
    return np.reshape(values, dims, order="F").astype(np.float64)


def write_matrix_csv(path, m) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w", encoding="ascii") as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: empty CSV matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged CSV rows")
    return np.array(rows, dtype=np.float64)


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM into a float64 rows x cols array."""
    data = Path(path).read_bytes()
    pos = 0

    def token():
        nonlocal pos
        while True:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if pos < len(data) and data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        return data[start:pos]

    if token() != b"P5":
        raise ValueError(f"{path}: not a P5 PGM")
    width = int(token())
    height = int(token())
    maxval = int(token())
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace after header
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError(f"{path}: truncated raster")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return img.astype(np.float64)


def write_pgm(path, img, maxval: int = 255) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM output requires a 2-mode tensor")
    clipped = np.clip(np.rint(img), 0, maxval).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii"))
        fh.write(clipped.tobytes())
