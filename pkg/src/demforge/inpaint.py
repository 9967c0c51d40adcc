"""Classical inpainting baselines for elevation grids.

- diffusion: discrete harmonic extension of the known cells into the missing
  region (5-point Laplace equation, solved sparsely).
- fast_marching: Telea-style fill in increasing distance from the hole
  boundary, with directional/distance/level-set weighted estimates.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import spsolve

from .grid import ElevationGrid

METHODS = ("diffusion", "fast_marching")


@dataclass(frozen=True)
class InpaintConfig:
    method: str = "diffusion"
    radius_px: int = 3        # fast-marching neighborhood
    tol: float = 1e-6         # diffusion convergence (iterative fallback)
    max_iters: int = 10_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.radius_px < 1:
            raise ValueError("radius_px must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


def inpaint(g: ElevationGrid, cfg: InpaintConfig = InpaintConfig()) -> ElevationGrid:
    missing = g.missing
    if not missing.any():
        return ElevationGrid(g.geometry, g.cells.copy())
    if missing.all():
        raise ValueError("cannot inpaint a fully missing grid")

    cells = g.cells.astype(np.float64)
    cells = _fill_isolated(cells, missing)
    missing = np.isnan(cells)
    if missing.any():
        if cfg.method == "diffusion":
            cells = _harmonic_fill(cells, missing, cfg)
        else:
            cells = _telea_fill(cells, missing, cfg.radius_px)

    out = g.cells.copy()
    hole = g.missing
    out[hole] = cells[hole].astype(np.float32)
    return ElevationGrid(g.geometry, out)


def _fill_isolated(cells, missing):
    """Missing components without any known 4-neighbor get the grid mean."""
    labels, n = ndimage.label(missing)
    if n == 0:
        return cells
    known = ~missing
    touches = np.zeros(n + 1, dtype=bool)
    for shifted in _neighbor_views(known):
        touches |= np.bincount(labels[shifted & missing].ravel(), minlength=n + 1).astype(bool)
    isolated = ~touches[labels] & missing
    if isolated.any():
        warnings.warn("missing region without known boundary; filling with grid mean")
        cells = cells.copy()
        cells[isolated] = cells[known].mean()
    return cells


def _neighbor_views(known):
    """Boolean maps 'has a known neighbor in direction d', one per direction."""
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        shifted = np.zeros_like(known)
        if shift == 1:
            if axis == 0:
                shifted[1:, :] = known[:-1, :]
            else:
                shifted[:, 1:] = known[:, :-1]
        else:
            if axis == 0:
                shifted[:-1, :] = known[1:, :]
            else:
                shifted[:, :-1] = known[:, 1:]
        yield shifted


def _harmonic_fill(cells, missing, cfg):
    rows, cols = cells.shape
    idx = -np.ones(cells.shape, dtype=np.int64)
    ii, jj = np.nonzero(missing)
    n = len(ii)
    idx[ii, jj] = np.arange(n)

    data, rows_a, cols_a = [], [], []
    rhs = np.zeros(n)
    deg = np.zeros(n)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni = ii + di
        nj = jj + dj
        inb = (ni >= 0) & (ni < rows) & (nj >= 0) & (nj < cols)
        deg[inb] += 1
        nbr_missing = np.zeros(n, dtype=bool)
        nbr_missing[inb] = missing[ni[inb], nj[inb]]
        k = inb & nbr_missing
        rows_a.append(np.arange(n)[k])
        cols_a.append(idx[ni[k], nj[k]])
        data.append(-np.ones(k.sum()))
        kk = inb & ~nbr_missing
        rhs[kk] += cells[ni[kk], nj[kk]]
    rows_a.append(np.arange(n))
    cols_a.append(np.arange(n))
    data.append(deg)

    a = sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows_a), np.concatenate(cols_a))),
        shape=(n, n),
    )
    sol = spsolve(a, rhs)
    out = cells.copy()
    out[ii, jj] = sol
    return out


_KNOWN, _BAND, _INSIDE = 0, 1, 2


def _telea_fill(cells, missing, radius):
    rows, cols = cells.shape
    flags = np.where(missing, _INSIDE, _KNOWN).astype(np.int8)
    dist = np.where(missing, np.inf, 0.0)
    out = cells.copy()

    heap = []
    for i, j in zip(*np.nonzero(missing)):
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if 0 <= ni < rows and 0 <= nj < cols and flags[ni, nj] == _KNOWN:
                if flags[i, j] != _BAND:
                    flags[i, j] = _BAND
                    dist[i, j] = _eikonal(dist, flags, i, j, rows, cols)
                    heapq.heappush(heap, (dist[i, j], i, j))
                break

    while heap:
        d, i, j = heapq.heappop(heap)
        if flags[i, j] == _KNOWN or d > dist[i, j]:
            continue
        out[i, j] = _telea_estimate(out, flags, dist, i, j, radius, rows, cols)
        flags[i, j] = _KNOWN
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if 0 <= ni < rows and 0 <= nj < cols and flags[ni, nj] != _KNOWN:
                t = _eikonal(dist, flags, ni, nj, rows, cols)
                if t < dist[ni, nj]:
                    dist[ni, nj] = t
                flags[ni, nj] = _BAND
                heapq.heappush(heap, (dist[ni, nj], ni, nj))
    return out


def _eikonal(dist, flags, i, j, rows, cols):
    """Upwind quadratic solution of |grad T| = 1 at (i, j) from known values."""
    tx = math.inf
    for di in (-1, 1):
        ni = i + di
        if 0 <= ni < rows and flags[ni, j] == _KNOWN:
            tx = min(tx, dist[ni, j])
    ty = math.inf
    for dj in (-1, 1):
        nj = j + dj
        if 0 <= nj < cols and flags[i, nj] == _KNOWN:
            ty = min(ty, dist[i, nj])
    if math.isinf(tx) and math.isinf(ty):
        return math.inf
    if math.isinf(tx):
        return ty + 1.0
    if math.isinf(ty):
        return tx + 1.0
    if abs(tx - ty) >= 1.0:
        return min(tx, ty) + 1.0
    s = tx + ty
    disc = s * s - 2.0 * (tx * tx + ty * ty - 1.0)
    return 0.5 * (s + math.sqrt(disc))


def _telea_estimate(out, flags, dist, i, j, radius, rows, cols):
    # normal of the fill front: gradient of the distance map
    gx = _central_diff(dist, flags, i, j, 0, rows, cols)
    gy = _central_diff(dist, flags, i, j, 1, rows, cols)

    num = 0.0
    den = 0.0
    fallback_num = 0.0
    fallback_den = 0.0
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            ni, nj = i + di, j + dj
            if not (0 <= ni < rows and 0 <= nj < cols):
                continue
            if flags[ni, nj] != _KNOWN:
                continue
            r2 = di * di + dj * dj
            if r2 == 0 or r2 > radius * radius:
                continue
            vx, vy = -di, -dj  # q -> p
            direction = abs(vx * gx + vy * gy) / math.sqrt(r2)
            if direction < 1e-6:
                direction = 1e-6
            dst = 1.0 / r2
            lev = 1.0 / (1.0 + abs(dist[i, j] - dist[ni, nj]))
            w = direction * dst * lev
            ix = _central_diff(out, flags, ni, nj, 0, rows, cols)
            iy = _central_diff(out, flags, ni, nj, 1, rows, cols)
            num += w * (out[ni, nj] + ix * vx + iy * vy)
            den += w
            fallback_num += dst * lev * out[ni, nj]
            fallback_den += dst * lev
    if den > 0.0:
        return num / den
    if fallback_den > 0.0:
        return fallback_num / fallback_den
    # no known cell in reach (very large radius-starved hole): nearest known mean
    return float(np.nanmean(np.where(flags == _KNOWN, out, np.nan)))


def _central_diff(values, flags, i, j, axis, rows, cols):
    if axis == 0:
        lo, hi = i - 1, i + 1
        ok_lo = lo >= 0 and flags[lo, j] == _KNOWN
        ok_hi = hi < rows and flags[hi, j] == _KNOWN
        v_lo = values[lo, j] if ok_lo else 0.0
        v_hi = values[hi, j] if ok_hi else 0.0
    else:
        lo, hi = j - 1, j + 1
        ok_lo = lo >= 0 and flags[i, lo] == _KNOWN
        ok_hi = hi < cols and flags[i, hi] == _KNOWN
        v_lo = values[i, lo] if ok_lo else 0.0
        v_hi = values[i, hi] if ok_hi else 0.0
    if ok_lo and ok_hi:
        return 0.5 * (v_hi - v_lo)
    if ok_hi:
        return v_hi - values[i, j] if not math.isinf(values[i, j]) else 0.0
    if ok_lo:
        return values[i, j] - v_lo if not math.isinf(values[i, j]) else 0.0
    return 0.0
