"""Core elevation-grid types, mask/composition operations and the DGM file format.

Grids are rectangular, row-major float32 elevation arrays in meters. A missing
(occluded) cell is encoded as quiet NaN, both in memory and on disk.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

# Canonical quiet-NaN bit pattern written to disk; any NaN is accepted on read.
QUIET_NAN_BITS = np.uint32(0x7FC00000)

DGM_MAGIC = b"DEMG"
DGM_VERSION = 1
_DGM_HEADER = struct.Struct("<4sHIIdd")


class GridFormatError(ValueError):
    """Raised for malformed DGM files (bad magic, version, truncation)."""


class GeometryMismatchError(ValueError):
    """Raised when an operation receives grids/masks with differing geometry."""


@dataclass(frozen=True)
class GridGeometry:
    rows: int
    cols: int
    resolution_x: float = 0.04
    resolution_y: float = 0.04

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.rows}x{self.cols}")
        for r in (self.resolution_x, self.resolution_y):
            if not (np.isfinite(r) and r > 0):
                raise ValueError(f"resolutions must be finite and > 0, got {r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)


@dataclass(frozen=True)
class ElevationGrid:
    geometry: GridGeometry
    cells: np.ndarray  # rows x cols float32, NaN = missing

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float32)
        if cells.shape != self.geometry.shape:
            raise ValueError(
                f"cells shape {cells.shape} does not match geometry {self.geometry.shape}"
            )
        if np.isinf(cells).any():
            raise ValueError("non-missing cells must be finite (found +/-inf)")
        object.__setattr__(self, "cells", cells)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.cells)

    def missing_ratio(self) -> float:
        return float(np.isnan(self.cells).mean())

    def is_complete(self) -> bool:
        return not np.isnan(self.cells).any()


@dataclass(frozen=True)
class OcclusionMask:
    geometry: GridGeometry
    bits: np.ndarray  # rows x cols, 1 = occluded

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.shape != self.geometry.shape:
            raise ValueError(
                f"bits shape {bits.shape} does not match geometry {self.geometry.shape}"
            )
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("mask bits must be 0 or 1")
        object.__setattr__(self, "bits", bits.astype(np.uint8))

    def ratio(self) -> float:
        return float(self.bits.mean())


@dataclass(frozen=True)
class NormalizationState:
    mean_elevation: float

    def __post_init__(self):
        if not np.isfinite(self.mean_elevation):
            raise ValueError("normalization mean must be finite")


def mask_from_grid(g: ElevationGrid) -> OcclusionMask:
    """Binary occlusion mask: 1 exactly where the grid cell is missing."""
    return OcclusionMask(g.geometry, np.isnan(g.cells).astype(np.uint8))


def _check_geometry(*items):
    first = items[0].geometry
    for it in items[1:]:
        if it.geometry != first:
            raise GeometryMismatchError(f"geometry mismatch: {it.geometry} != {first}")


def compose(occluded: ElevationGrid, reconstruction: ElevationGrid,
            mask: OcclusionMask) -> ElevationGrid:
    """Patch the occluded grid with reconstructed values where the mask is set."""
    _check_geometry(occluded, reconstruction, mask)
    if not reconstruction.is_complete():
        raise ValueError("reconstruction must not contain missing cells")
    out = occluded.cells.copy()
    m = mask.bits.astype(bool)
    out[m] = reconstruction.cells[m]
    return ElevationGrid(occluded.geometry, out)


def normalize(g: ElevationGrid) -> tuple[ElevationGrid, NormalizationState]:
    """Subtract the mean of the non-missing cells; missing cells stay missing."""
    valid = ~np.isnan(g.cells)
    if not valid.any():
        raise ValueError("cannot normalize a fully missing grid")
    mean = float(g.cells[valid].mean(dtype=np.float64))
    return ElevationGrid(g.geometry, g.cells - np.float32(mean)), NormalizationState(mean)


def denormalize(g: ElevationGrid, s: NormalizationState) -> ElevationGrid:
    """Add the stored mean back to every non-missing cell."""
    return ElevationGrid(g.geometry, g.cells + np.float32(s.mean_elevation))


def _canonical_nan_bits(cells: np.ndarray) -> bytes:
    """Row-major little-endian f32 payload with missing cells as canonical quiet NaN."""
    flat = np.ascontiguousarray(cells, dtype="<f4").reshape(-1)
    bits = flat.view("<u4").copy()
    bits[np.isnan(flat)] = QUIET_NAN_BITS
    return bits.tobytes()


def write_grid(g: ElevationGrid, path) -> None:
    header = _DGM_HEADER.pack(
        DGM_MAGIC, DGM_VERSION, g.geometry.rows, g.geometry.cols,
        g.geometry.resolution_x, g.geometry.resolution_y,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(_canonical_nan_bits(g.cells))


def read_grid(path) -> ElevationGrid:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _DGM_HEADER.size:
        raise GridFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, rows, cols, rx, ry = _DGM_HEADER.unpack_from(raw)
    if magic != DGM_MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}")
    if version != DGM_VERSION:
        raise GridFormatError(f"{path}: unsupported format version {version}")
    if rows < 1 or cols < 1 or rows * cols > 2**31:
        raise GridFormatError(f"{path}: invalid dimensions {rows}x{cols}")
    payload = raw[_DGM_HEADER.size:]
    expected = rows * cols * 4
    if len(payload) < expected:
        raise GridFormatError(
            f"{path}: truncated payload ({len(payload)} bytes, expected {expected})"
        )
    cells = np.frombuffer(payload[:expected], dtype="<f4").reshape(rows, cols)
    return ElevationGrid(GridGeometry(rows, cols, rx, ry), cells.copy())
