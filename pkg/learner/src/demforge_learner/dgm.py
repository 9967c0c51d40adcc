"""Reader/writer for the DGM grid format and the JSONL dataset manifests.

Implemented against the serialized formats only, so this package stays
decoupled from the toolkit that produces the datasets.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

MAGIC = b"DEMG"
VERSION = 1
_HEADER = struct.Struct("<4sHIIdd")
QUIET_NAN_BITS = np.uint32(0x7FC00000)

MANIFEST_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Grid:
    rows: int
    cols: int
    resolution_x: float
    resolution_y: float
    cells: np.ndarray  # rows x cols float32, NaN = missing

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.cells)


def read_grid(path) -> Grid:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, rows, cols, rx, ry = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    payload = raw[_HEADER.size:]
    expected = rows * cols * 4
    if len(payload) < expected:
        raise ValueError(f"{path}: truncated payload")
    cells = np.frombuffer(payload[:expected], dtype="<f4").reshape(rows, cols).copy()
    return Grid(rows, cols, rx, ry, cells)


def write_grid(g: Grid, path) -> None:
    header = _HEADER.pack(MAGIC, VERSION, g.rows, g.cols,
                          g.resolution_x, g.resolution_y)
    flat = np.ascontiguousarray(g.cells, dtype="<f4").reshape(-1)
    bits = flat.view("<u4").copy()
    bits[np.isnan(flat)] = QUIET_NAN_BITS
    with open(path, "wb") as f:
        f.write(header)
        f.write(bits.tobytes())


@dataclass
class Manifest:
    split: str
    records: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    root: Optional[Path] = None

    @classmethod
    def read(cls, path) -> "Manifest":
        path = Path(path)
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty manifest")
        header = json.loads(lines[0])
        if header.get("schema_version") != MANIFEST_SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported schema {header.get('schema_version')}")
        records = [json.loads(ln) for ln in lines[1:]]
        if header.get("count") != len(records):
            raise ValueError(f"{path}: record count mismatch")
        return cls(split=header["split"], records=records,
                   config=header.get("config", {}), root=path.parent)

    def grid_path(self, record: dict, role: str) -> Path:
        return (self.root or Path(".")) / record["grids"][role]

    def load_grid(self, record: dict, role: str) -> Grid:
        return read_grid(self.grid_path(record, role))
