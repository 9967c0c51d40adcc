"""Evaluation metrics: l1/MSE over occluded cells, PSNR against a dataset-level
dynamic range, and Gaussian-windowed SSIM over full grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.ndimage import correlate1d

from .grid import ElevationGrid, GeometryMismatchError, OcclusionMask

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class DynamicRange:
    L: float  # meters, max - min elevation over a dataset split


@dataclass(frozen=True)
class MetricsReport:
    l1_occ: float
    mse_occ: float
    psnr_occ: float  # dB, may be +inf
    ssim_rec: Optional[float]
    ssim_comp: Optional[float]
    n_occluded_cells: int

    def to_dict(self) -> dict:
        d = {
            "l1_occ": self.l1_occ,
            "mse_occ": self.mse_occ,
            "psnr_occ": None if math.isinf(self.psnr_occ) else self.psnr_occ,
            "psnr_occ_infinite": math.isinf(self.psnr_occ),
            "ssim_rec": self.ssim_rec,
            "ssim_comp": self.ssim_comp,
            "n_occluded_cells": self.n_occluded_cells,
        }
        return d


def dynamic_range(grids: Iterable[ElevationGrid]) -> DynamicRange:
    """Global max minus global min over the non-missing cells of a split."""
    lo = math.inf
    hi = -math.inf
    empty = True
    for g in grids:
        valid = ~g.missing
        if valid.any():
            empty = False
            lo = min(lo, float(g.cells[valid].min()))
            hi = max(hi, float(g.cells[valid].max()))
    if empty:
        raise ValueError("dynamic range of an empty split is undefined")
    return DynamicRange(hi - lo)


def occluded_errors(gt: ElevationGrid, rec: ElevationGrid,
                    mask: OcclusionMask) -> tuple[float, float]:
    """Mean |gt-rec| and mean (gt-rec)^2 over occluded cells with known truth."""
    if gt.geometry != rec.geometry or gt.geometry != mask.geometry:
        raise GeometryMismatchError("gt/rec/mask geometries differ")
    sel = mask.bits.astype(bool) & ~gt.missing
    if not sel.any():
        raise ValueError("no occluded cells with known ground truth to evaluate")
    diff = gt.cells[sel].astype(np.float64) - rec.cells[sel].astype(np.float64)
    if np.isnan(diff).any():
        raise ValueError("reconstruction is missing inside the evaluation region")
    return float(np.abs(diff).mean()), float((diff ** 2).mean())


def psnr_occ(mse_occ: float, L: float) -> float:
    if L <= 0:
        raise ValueError(f"dynamic range must be > 0, got {L}")
    if mse_occ == 0.0:
        return math.inf
    return 10.0 * math.log10(L * L / mse_occ)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    w = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def _windowed(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    y = correlate1d(x, win, axis=0, mode="constant", cval=0.0)
    return correlate1d(y, win, axis=1, mode="constant", cval=0.0)


def ssim(a: ElevationGrid, b: ElevationGrid, L: float) -> float:
    """Mean SSIM with an 11-tap separable Gaussian window (sigma 1.5), border
    windows renormalized; three-term form with unit exponents and C3 = C2/2."""
    if a.geometry != b.geometry:
        raise GeometryMismatchError("SSIM inputs must share geometry")
    if not (a.is_complete() and b.is_complete()):
        raise ValueError("SSIM requires complete grids (no missing cells)")
    x = a.cells.astype(np.float64)
    y = b.cells.astype(np.float64)
    win = _gaussian_window()
    weight = _windowed(np.ones_like(x), win)  # border renormalization

    mu_x = _windowed(x, win) / weight
    mu_y = _windowed(y, win) / weight
    var_x = np.maximum(_windowed(x * x, win) / weight - mu_x ** 2, 0.0)
    var_y = np.maximum(_windowed(y * y, win) / weight - mu_y ** 2, 0.0)
    cov = _windowed(x * y, win) / weight - mu_x * mu_y

    c1 = (SSIM_K1 * L) ** 2
    c2 = (SSIM_K2 * L) ** 2
    c3 = c2 / 2.0
    sx = np.sqrt(var_x)
    sy = np.sqrt(var_y)
    luminance = (2.0 * mu_x * mu_y + c1) / (mu_x ** 2 + mu_y ** 2 + c1)
    contrast = (2.0 * sx * sy + c2) / (var_x + var_y + c2)
    structure = (cov + c3) / (sx * sy + c3)
    return float((luminance * contrast * structure).mean())


def report(gt: ElevationGrid, rec: ElevationGrid, mask: OcclusionMask, L: float,
           comp: Optional[ElevationGrid] = None) -> MetricsReport:
    l1, mse = occluded_errors(gt, rec, mask)
    can_ssim = gt.is_complete()
    return MetricsReport(
        l1_occ=l1,
        mse_occ=mse,
        psnr_occ=psnr_occ(mse, L),
        ssim_rec=ssim(gt, rec, L) if can_ssim else None,
        ssim_comp=ssim(gt, comp, L) if can_ssim and comp is not None else None,
        n_occluded_cells=int((mask.bits.astype(bool) & ~gt.missing).sum()),
    )
