"""Matrix files: the RUTV binary format and plain CSV.

RUTV layout: the 4 magic bytes ``RUTV``, rows and cols as little-endian
uint64, then rows*cols little-endian float64 values in column-major order.
"""
from __future__ import annotations

import csv
import os
import struct

import numpy as np

from .errors import FormatError

MAGIC = b"RUTV"
_HEADER = struct.Struct("<4sQQ")


def write_rutv(path: str | os.PathLike, A) -> None:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise FormatError(f"expected a 2-D matrix, got {A.ndim}-D")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, A.shape[0], A.shape[1]))
        fh.write(np.asfortranarray(A).astype("<f8").tobytes(order="F"))


def read_rutv(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, m, n = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        payload = fh.read()
    if len(payload) != 8 * m * n:
        raise FormatError(f"{path}: expected {8 * m * n} data bytes for {m}x{n}, found {len(payload)}")
    A = np.frombuffer(payload, dtype="<f8").reshape((m, n), order="F").astype(np.float64, order="F")
    if not np.all(np.isfinite(A)):
        raise FormatError(f"{path}: non-finite entries")
    return A


def write_csv(path: str | os.PathLike, A) -> None:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise FormatError(f"expected a 2-D matrix, got {A.ndim}-D")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in A:
            w.writerow(repr(float(x)) for x in row)


def read_csv(path: str | os.PathLike) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no data")
    if len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: rows have different lengths")
    A = np.asfortranarray(np.array(rows, dtype=np.float64))
    if not np.all(np.isfinite(A)):
        raise FormatError(f"{path}: non-finite entries")
    return A


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    """Read either format; CSV is recognised by extension, everything else is RUTV."""
    if str(path).lower().endswith(".csv"):
        return read_csv(path)
    return read_rutv(path)


def write_matrix(path: str | os.PathLike, A) -> None:
    if str(path).lower().endswith(".csv"):
        write_csv(path, A)
    else:
        write_rutv(path, A)
