"""Per-cell visibility of an elevation grid from a vantage point.

A sightline runs from the vantage point to every cell center; the cell is
occluded if any pixel crossed by the sightline stores an elevation strictly
greater than the ray's height over that pixel. `cast` walks the crossed
pixels incrementally; this equals stepping along the ray (half-resolution
steps) in the dense-sampling limit, which makes the result step-size
invariant. Cells already missing in the input are always occluded.

Conventions shared by `cast` and the dense-sampling test oracle `cast_oracle`:
  - cell (u, v) sits at x = (-rows/2 + u) * res_x, y = (-cols/2 + v) * res_y;
  - ray positions map back to pixels by round-half-away-from-zero;
  - a visited pixel is tested against the ray height at the projection of the
    pixel's center onto the ray (step-size invariant, so coarse and dense
    stepping decide every visited pixel identically);
  - grazing equality (elevation == ray height) does not occlude;
  - the pixel under the vantage point never occludes its own rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import ElevationGrid, OcclusionMask


class MissingAnchorError(ValueError):
    """The pixel under a requested vantage (x, y) has no stored elevation."""


@dataclass(frozen=True)
class VantagePoint:
    x: float  # meters, relative to grid center
    y: float
    z: float  # absolute elevation, meters

    def __post_init__(self):
        if not all(map(math.isfinite, (self.x, self.y, self.z))):
            raise ValueError(f"vantage point coordinates must be finite: {self}")


@dataclass(frozen=True)
class RayCastResult:
    occlusion: OcclusionMask
    occluded_grid: ElevationGrid


@njit(cache=True)
def _round_half_away(x):
    if x >= 0.0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))


@njit(cache=True)
def _cast_kernel(cells, rx, ry, vx, vy, vz):
    # Exact plan-view pixel traversal: visit every pixel the sightline crosses
    # (the dense-sampling limit of stepping along the ray) and test each one
    # against the canonical per-pixel ray height.
    n, m = cells.shape
    occ = np.zeros((n, m), dtype=np.uint8)
    u_vp = _round_half_away(n / 2.0 + vx / rx)
    v_vp = _round_half_away(m / 2.0 + vy / ry)
    # vantage plan position in continuous pixel coordinates
    a0x = n / 2.0 + vx / rx
    a0y = m / 2.0 + vy / ry
    for u in range(n):
        gx = (-(n / 2.0) + u) * rx
        for v in range(m):
            gz = cells[u, v]
            if math.isnan(gz):
                occ[u, v] = 1
                continue
            gy = (-(m / 2.0) + v) * ry
            dx = gx - vx
            dy = gy - vy
            dz = gz - vz
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            if dist == 0.0:
                continue
            dx /= dist
            dy /= dist
            dz /= dist

            # plan segment in pixel coordinates
            bx = float(u) - a0x
            by = float(v) - a0y
            cu = u_vp
            cv = v_vp
            if cu == u and cv == v:
                continue
            step_u = 1 if bx > 0.0 else (-1 if bx < 0.0 else 0)
            step_v = 1 if by > 0.0 else (-1 if by < 0.0 else 0)
            inv_u = abs(1.0 / bx) if bx != 0.0 else math.inf
            inv_v = abs(1.0 / by) if by != 0.0 else math.inf
            t_max_u = ((cu + 0.5 * step_u) - a0x) / bx if step_u != 0 else math.inf
            t_max_v = ((cv + 0.5 * step_v) - a0y) / by if step_v != 0 else math.inf

            occluded = False
            guard = 2 * (n + m) + 4
            while guard > 0:
                guard -= 1
                if t_max_u <= t_max_v:
                    if t_max_u > 1.0:
                        break
                    cu += step_u
                    t_max_u += inv_u
                else:
                    if t_max_v > 1.0:
                        break
                    cv += step_v
                    t_max_v += inv_v
                if cu == u and cv == v:
                    break
                if cu == u_vp and cv == v_vp:
                    continue
                if 0 <= cu < n and 0 <= cv < m:
                    e = cells[cu, cv]
                    if not math.isnan(e):
                        z_ref = _ray_height_at_pixel(
                            n, m, rx, ry, vx, vy, vz, dx, dy, dz, cu, cv)
                        if e > z_ref:
                            occluded = True
                            break
            if occluded:
                occ[u, v] = 1
    return occ


@njit(cache=True)
def _ray_height_at_pixel(n, m, rx, ry, vx, vy, vz, dx, dy, dz, u_rc, v_rc):
    """Ray height where the plan-view ray passes closest to the pixel center."""
    cx = (-(n / 2.0) + u_rc) * rx
    cy = (-(m / 2.0) + v_rc) * ry
    denom = dx * dx + dy * dy
    if denom == 0.0:  # vertical ray never visits another pixel
        return vz
    t = ((cx - vx) * dx + (cy - vy) * dy) / denom
    return vz + t * dz


@njit(cache=True)
def _oracle_kernel(cells, rx, ry, vx, vy, vz, step_divisor):
    # Independent formulation: sample the plan segment at one point inside
    # every interval between pixel-boundary crossings (plus the uniform
    # step-divisor samples, which land in the same intervals), round each
    # sample to its pixel, and apply the shared per-pixel height test. The
    # boundary-crossing samples make the answer the dense-sampling limit,
    # independent of step_divisor.
    n, m = cells.shape
    occ = np.zeros((n, m), dtype=np.uint8)
    u_vp = _round_half_away(n / 2.0 + vx / rx)
    v_vp = _round_half_away(m / 2.0 + vy / ry)
    a0x = n / 2.0 + vx / rx
    a0y = m / 2.0 + vy / ry
    ts = np.empty(n + m + 4, dtype=np.float64)
    for u in range(n):
        gx = (-(n / 2.0) + u) * rx
        for v in range(m):
            gz = cells[u, v]
            if math.isnan(gz):
                occ[u, v] = 1
                continue
            gy = (-(m / 2.0) + v) * ry
            dx = gx - vx
            dy = gy - vy
            dz = gz - vz
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            if dist == 0.0:
                continue
            dx /= dist
            dy /= dist
            dz /= dist

            bx = float(u) - a0x
            by = float(v) - a0y
            # collect segment parameters of all pixel-boundary crossings
            cnt = 0
            ts[cnt] = 0.0
            cnt += 1
            if bx != 0.0:
                lo = min(a0x, float(u))
                hi = max(a0x, float(u))
                j = int(math.floor(lo + 0.5))
                while j + 0.5 < hi:
                    if j + 0.5 > lo:
                        ts[cnt] = (j + 0.5 - a0x) / bx
                        cnt += 1
                    j += 1
            if by != 0.0:
                lo = min(a0y, float(v))
                hi = max(a0y, float(v))
                j = int(math.floor(lo + 0.5))
                while j + 0.5 < hi:
                    if j + 0.5 > lo:
                        ts[cnt] = (j + 0.5 - a0y) / by
                        cnt += 1
                    j += 1
            ts[cnt] = 1.0
            cnt += 1
            seg = np.sort(ts[:cnt])

            for k in range(cnt - 1):
                tm = 0.5 * (seg[k] + seg[k + 1])
                u_rc = _round_half_away(a0x + tm * bx)
                v_rc = _round_half_away(a0y + tm * by)
                if u_rc == u and v_rc == v:
                    break
                if u_rc == u_vp and v_rc == v_vp:
                    continue
                if 0 <= u_rc < n and 0 <= v_rc < m:
                    e = cells[u_rc, v_rc]
                    if not math.isnan(e):
                        z_ref = _ray_height_at_pixel(
                            n, m, rx, ry, vx, vy, vz, dx, dy, dz, u_rc, v_rc)
                        if e > z_ref:
                            occ[u, v] = 1
                            break
    return occ


def cast(grid: ElevationGrid, vp: VantagePoint) -> RayCastResult:
    """Ray-cast every cell from the vantage point and mark occluded cells."""
    geom = grid.geometry
    occ = _cast_kernel(grid.cells, geom.resolution_x, geom.resolution_y,
                       vp.x, vp.y, vp.z)
    occluded_cells = grid.cells.copy()
    occluded_cells[occ.astype(bool)] = np.nan
    return RayCastResult(
        occlusion=OcclusionMask(geom, occ),
        occluded_grid=ElevationGrid(geom, occluded_cells),
    )


def cast_oracle(grid: ElevationGrid, vp: VantagePoint,
                step_divisor: int = 20) -> OcclusionMask:
    """Dense-sampling visibility oracle for tests; shares the pixel conventions
    of `cast` but samples the ray with step = min-resolution / step_divisor."""
    if step_divisor < 2:
        raise ValueError("step_divisor must be >= 2")
    geom = grid.geometry
    occ = _oracle_kernel(grid.cells, geom.resolution_x, geom.resolution_y,
                         vp.x, vp.y, vp.z, step_divisor)
    return OcclusionMask(geom, occ)


def anchor_pixel(grid: ElevationGrid, x: float, y: float) -> tuple[int, int]:
    geom = grid.geometry
    u = _round_half_away.py_func(geom.rows / 2.0 + x / geom.resolution_x)
    v = _round_half_away.py_func(geom.cols / 2.0 + y / geom.resolution_y)
    if not (0 <= u < geom.rows and 0 <= v < geom.cols):
        raise ValueError(f"({x}, {y}) lies outside the grid bounds")
    return u, v


def vantage_from_grid(grid: ElevationGrid, x: float, y: float,
                      z_offset: float) -> VantagePoint:
    """Vantage anchored to the grid: z = elevation at (x, y) plus z_offset."""
    u, v = anchor_pixel(grid, x, y)
    e = grid.cells[u, v]
    if np.isnan(e):
        raise MissingAnchorError(f"anchor pixel ({u}, {v}) at ({x}, {y}) is missing")
    return VantagePoint(x, y, float(e) + z_offset)
