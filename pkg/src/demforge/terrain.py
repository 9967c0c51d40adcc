"""Procedural ground-truth terrains: Perlin hills, standard stairs, random boxes.

All generators are pure functions of (kind, geometry, seed): the same spec
always produces a bit-identical grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ElevationGrid, GridGeometry
from .raycast import VantagePoint, anchor_pixel

TERRAIN_KINDS = ("hills", "stairs", "boxes")

# Hills defaults: 3 octaves of Perlin noise, base wavelength = grid width / 2,
# persistence 0.5, elevation range rescaled to `amplitude` meters. Gentle
# rolling ground at robot scale: occlusion shows up under 0.2-0.5 m vantage
# offsets without burying most of the grid in shadow.
HILLS_OCTAVES = 3
HILLS_PERSISTENCE = 0.5
HILLS_AMPLITUDE = 0.175

# Stairs defaults: legged-robot scale steps along one of 8 compass directions.
STAIR_RISE = 0.15
STAIR_TREAD = 0.30

# Boxes defaults: prisms unioned by cellwise max over the ground plane.
BOX_COUNT_RANGE = (5, 15)
BOX_SIDE_RANGE = (0.2, 1.0)
BOX_HEIGHT_RANGE = (0.05, 0.4)

# Scene sampling: vantage planar position and per-kind elevation offsets.
ROBOT_XY_RANGE = (-1.25, 1.25)
VANTAGE_OFFSET = {"hills": (0.2, 0.5), "stairs": (0.2, 0.3), "boxes": (0.2, 0.3)}


@dataclass(frozen=True)
class TerrainSpec:
    kind: str
    geometry: GridGeometry = field(default_factory=lambda: GridGeometry(64, 64))
    seed: int = 0
    amplitude: float = HILLS_AMPLITUDE  # hills only

    def __post_init__(self):
        if self.kind not in TERRAIN_KINDS:
            raise ValueError(f"unknown terrain kind {self.kind!r}, expected one of {TERRAIN_KINDS}")


def _cell_centers(geom: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Cell coordinates in meters relative to the grid center (matches raycast)."""
    xs = (np.arange(geom.rows) - geom.rows / 2.0) * geom.resolution_x
    ys = (np.arange(geom.cols) - geom.cols / 2.0) * geom.resolution_y
    return np.meshgrid(xs, ys, indexing="ij")


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _perlin_octave(rows, cols, period_px, rng):
    """One octave of 2D Perlin gradient noise over a rows x cols pixel lattice."""
    li = int(rows / period_px) + 2
    lj = int(cols / period_px) + 2
    angles = rng.uniform(0.0, 2.0 * math.pi, size=(li, lj))
    gx = np.cos(angles)
    gy = np.sin(angles)

    px = np.arange(rows)[:, None] / period_px
    py = np.arange(cols)[None, :] / period_px
    i0 = np.floor(px).astype(np.int64)
    j0 = np.floor(py).astype(np.int64)
    fx = px - i0
    fy = py - j0
    i0 = np.broadcast_to(i0, (rows, cols))
    j0 = np.broadcast_to(j0, (rows, cols))
    fx = np.broadcast_to(fx, (rows, cols))
    fy = np.broadcast_to(fy, (rows, cols))

    def dot(di, dj):
        ii = i0 + di
        jj = j0 + dj
        return gx[ii, jj] * (fx - di) + gy[ii, jj] * (fy - dj)

    u = _fade(fx)
    v = _fade(fy)
    n00 = dot(0, 0)
    n10 = dot(1, 0)
    n01 = dot(0, 1)
    n11 = dot(1, 1)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    return nx0 + v * (nx1 - nx0)


def gen_hills(spec: TerrainSpec) -> ElevationGrid:
    if spec.kind != "hills":
        raise ValueError(f"gen_hills called with kind {spec.kind!r}")
    geom = spec.geometry
    rng = np.random.default_rng(spec.seed)
    noise = np.zeros(geom.shape)
    period = max(geom.rows, geom.cols) / 2.0
    amp = 1.0
    for _ in range(HILLS_OCTAVES):
        noise += amp * _perlin_octave(geom.rows, geom.cols, max(period, 1.0), rng)
        period /= 2.0
        amp *= HILLS_PERSISTENCE
    lo, hi = noise.min(), noise.max()
    if spec.amplitude == 0.0 or hi == lo:
        cells = np.zeros(geom.shape, dtype=np.float32)
    else:
        cells = ((noise - lo) / (hi - lo) * spec.amplitude).astype(np.float32)
    return ElevationGrid(geom, cells)


# 8 compass directions (unit vectors in the x/y cell-coordinate frame)
_COMPASS = [(math.cos(k * math.pi / 4.0), math.sin(k * math.pi / 4.0)) for k in range(8)]


def gen_stairs(spec: TerrainSpec) -> ElevationGrid:
    if spec.kind != "stairs":
        raise ValueError(f"gen_stairs called with kind {spec.kind!r}")
    geom = spec.geometry
    rng = np.random.default_rng(spec.seed)
    cx, cy = _COMPASS[int(rng.integers(0, 8))]
    phase = float(rng.uniform(0.0, STAIR_TREAD))
    xg, yg = _cell_centers(geom)
    proj = xg * cx + yg * cy
    levels = np.floor((proj - phase) / STAIR_TREAD)
    cells = (STAIR_RISE * (levels - levels.min())).astype(np.float32)
    return ElevationGrid(geom, cells)


def gen_boxes(spec: TerrainSpec) -> ElevationGrid:
    if spec.kind != "boxes":
        raise ValueError(f"gen_boxes called with kind {spec.kind!r}")
    geom = spec.geometry
    rng = np.random.default_rng(spec.seed)
    n_boxes = int(rng.integers(BOX_COUNT_RANGE[0], BOX_COUNT_RANGE[1] + 1))
    xg, yg = _cell_centers(geom)
    cells = np.zeros(geom.shape)
    half_x = geom.rows / 2.0 * geom.resolution_x
    half_y = geom.cols / 2.0 * geom.resolution_y
    for _ in range(n_boxes):
        bx = rng.uniform(-half_x, half_x)
        by = rng.uniform(-half_y, half_y)
        length = rng.uniform(*BOX_SIDE_RANGE)
        width = rng.uniform(*BOX_SIDE_RANGE)
        height = rng.uniform(*BOX_HEIGHT_RANGE)
        yaw = rng.uniform(0.0, math.pi)
        dx = xg - bx
        dy = yg - by
        lx = dx * math.cos(yaw) + dy * math.sin(yaw)
        ly = -dx * math.sin(yaw) + dy * math.cos(yaw)
        inside = (np.abs(lx) <= length / 2.0) & (np.abs(ly) <= width / 2.0)
        cells = np.maximum(cells, np.where(inside, height, 0.0))
    return ElevationGrid(geom, cells.astype(np.float32))


_GENERATORS = {"hills": gen_hills, "stairs": gen_stairs, "boxes": gen_boxes}


def generate(spec: TerrainSpec) -> ElevationGrid:
    return _GENERATORS[spec.kind](spec)


def sample_scene(spec: TerrainSpec) -> tuple[ElevationGrid, VantagePoint]:
    """Terrain plus a vantage point anchored at a random robot position."""
    terrain = generate(spec)
    rng = np.random.default_rng([spec.seed, 0x5CE9E])
    geom = spec.geometry
    x = float(rng.uniform(*ROBOT_XY_RANGE))
    y = float(rng.uniform(*ROBOT_XY_RANGE))
    offset = float(rng.uniform(*VANTAGE_OFFSET[spec.kind]))
    # keep the anchor inside small test grids; on the default 64x64 geometry
    # the sampling range already lies within bounds
    x = float(np.clip(x, (-geom.rows / 2.0) * geom.resolution_x,
                      (geom.rows / 2.0 - 1.0) * geom.resolution_x))
    y = float(np.clip(y, (-geom.cols / 2.0) * geom.resolution_y,
                      (geom.cols / 2.0 - 1.0) * geom.resolution_y))
    u, v = anchor_pixel(terrain, x, y)
    z = float(terrain.cells[u, v]) + offset
    return terrain, VantagePoint(x, y, z)
