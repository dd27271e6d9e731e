"""Field maps: 8-bit PGM images and ``FLD1`` binary dumps.

``FLD1`` layout: the 4-byte magic ``b"FLD1"``, ``nx`` and ``ny`` as
little-endian u32, then ``nx*ny`` little-endian float64 values with x
varying fastest.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["write_pgm", "read_pgm", "write_fld", "read_fld", "emit_field_map"]

_MAGIC = b"FLD1"


def _to_bytes(field: np.ndarray) -> np.ndarray:
    f = np.asarray(field, dtype=float)
    top = f.max() if f.size else 0.0
    if top <= 0:
        return np.zeros(f.shape, dtype=np.uint8)
    return np.clip(np.rint(255.0 * f / top), 0, 255).astype(np.uint8)


def write_pgm(field: np.ndarray, path) -> None:
    """Binary PGM; image columns are x, rows are y with the largest y on top."""
    field = np.asarray(field)
    if field.ndim != 2:
        raise ValueError("field map must be 2-D")
    if not np.isfinite(field).all():
        raise ValueError("field map has non-finite values")
    img = _to_bytes(field).T[::-1]
    nx, ny = field.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_pgm(path) -> np.ndarray:
    """Pixel array back in ``(nx, ny)`` orientation."""
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    nx, ny, _ = int(parts[1]), int(parts[2]), int(parts[3])
    img = np.frombuffer(parts[4], dtype=np.uint8, count=nx * ny).reshape(ny, nx)
    return img[::-1].T.copy()


def write_fld(field: np.ndarray, path) -> None:
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise ValueError("field dump must be 2-D")
    nx, ny = field.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", nx, ny))
        fh.write(field.astype("<f8").tobytes(order="F"))


def read_fld(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError("not an FLD1 file")
    nx, ny = struct.unpack("<II", raw[4:12])
    data = np.frombuffer(raw, dtype="<f8", offset=12)
    if data.size != nx * ny:
        raise ValueError("truncated FLD1 file")
    return data.reshape((nx, ny), order="F").astype(float)


def emit_field_map(field: np.ndarray, path) -> tuple[Path, Path]:
    """Write ``<stem>.pgm`` and ``<stem>.fld`` for a real 2-D field."""
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (".pgm", ".fld") else path
    pgm, fld = stem.with_suffix(".pgm"), stem.with_suffix(".fld")
    try:
        write_pgm(field, pgm)
        write_fld(field, fld)
    except OSError as exc:
        raise OSError(f"cannot write field map {stem}: {exc}") from exc
    return pgm, fld
