"""Binary field archive: magic ``PFLD``, little-endian, bit-exact round trip.

Layout: ``PFLD`` (4 bytes), u32 version (1), u32 nx, u32 ny, u32 nt (number
of stored slices, 1 for a single field), f64 hx, f64 hy, f64 tau, followed by
``nt * nx * ny`` f64 samples, time-major then row-major.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Grid2D

__all__ = ["save_series", "load_series", "save_field", "ArchiveError"]

MAGIC = b"PFLD"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIddd")


class ArchiveError(ValueError):
    pass


def save_series(path, values: np.ndarray, grid: Grid2D, tau: float = 0.0) -> None:
    """Write a field series (nt, ny, nx) or a single field (ny, nx)."""
    arr = np.asarray(values, dtype="<f8")
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != grid.shape:
        raise ArchiveError(f"cannot archive shape {values.shape} on grid {grid.shape}")
    header = _HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny, arr.shape[0],
                          grid.hx, grid.hy, tau)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr).tobytes())


def save_field(path, field: np.ndarray, grid: Grid2D) -> None:
    save_series(path, field, grid, tau=0.0)


def load_series(path) -> tuple[np.ndarray, Grid2D, float]:
    """Read an archive back as ``(values (nt, ny, nx), grid, tau)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ArchiveError("truncated archive header")
    magic, version, nx, ny, nt, hx, hy, tau = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ArchiveError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ArchiveError(f"unsupported archive version {version}")
    expected = _HEADER.size + nt * nx * ny * 8
    if len(raw) != expected:
        raise ArchiveError(f"archive size {len(raw)} does not match header ({expected})")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(nt, ny, nx).copy()
    return values, Grid2D(nx=nx, ny=ny, hx=hx, hy=hy), tau
