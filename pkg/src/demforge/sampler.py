"""Artificial occlusion sampling for self-supervised training.

A vantage position is drawn uniformly over the grid; the vantage elevation
offset is then bracketed iteratively until the ray-cast occlusion ratio lands
inside the configured interval, or the iteration cap is hit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ElevationGrid, OcclusionMask
from .raycast import VantagePoint, anchor_pixel, cast


@dataclass(frozen=True)
class SamplerConfig:
    r_occ_min: float = 0.001
    r_occ_max: float = 0.5
    o_min_init: float = 0.1
    o_max_init: float = 2.0
    min_bracket: float = 0.05
    max_iters: int = 15

    def __post_init__(self):
        if not (0.0 <= self.r_occ_min < self.r_occ_max <= 1.0):
            raise ValueError(f"require 0 <= r_occ_min < r_occ_max <= 1, got "
                             f"[{self.r_occ_min}, {self.r_occ_max}]")
        if not self.o_min_init < self.o_max_init:
            raise ValueError("o_min_init must be < o_max_init")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class SamplerOutcome:
    success: bool
    mask: OcclusionMask            # artificial occlusion only
    input_grid: ElevationGrid      # target with artificial occlusion applied
    achieved_ratio: float
    iterations_used: int
    vantage: VantagePoint


def sample_occlusion(target: ElevationGrid, cfg: SamplerConfig,
                     seed: int) -> SamplerOutcome:
    """Draw a vantage and bracket its elevation offset until the occlusion
    ratio falls inside [r_occ_min, r_occ_max]; the returned mask covers only
    newly occluded, previously visible cells."""
    pre_missing = target.missing
    if pre_missing.all():
        raise ValueError("target grid is fully missing; cannot anchor a vantage")

    rng = np.random.default_rng(seed)
    geom = target.geometry
    half_x = geom.rows / 2.0 * geom.resolution_x
    half_y = geom.cols / 2.0 * geom.resolution_y

    # uniform vantage position; resample while the anchor pixel is missing
    while True:
        x = float(rng.uniform(-half_x, half_x - geom.resolution_x))
        y = float(rng.uniform(-half_y, half_y - geom.resolution_y))
        u, v = anchor_pixel(target, x, y)
        if not pre_missing[u, v]:
            break
    anchor_z = float(target.cells[u, v])

    o_min = cfg.o_min_init
    o_max = cfg.o_max_init
    total = geom.rows * geom.cols
    last = None
    for iteration in range(1, cfg.max_iters + 1):
        o = float(rng.uniform(o_min, o_max))
        vp = VantagePoint(x, y, anchor_z + o)
        result = cast(target, vp)
        ratio = float(result.occlusion.bits.sum()) / total
        artificial = result.occlusion.bits.astype(bool) & ~pre_missing
        last = SamplerOutcome(
            success=cfg.r_occ_min <= ratio <= cfg.r_occ_max,
            mask=OcclusionMask(geom, artificial.astype(np.uint8)),
            input_grid=result.occluded_grid,
            achieved_ratio=ratio,
            iterations_used=iteration,
            vantage=vp,
        )
        if last.success:
            return last
        if ratio > cfg.r_occ_max:
            o_min = o
            if o_max - o_min < cfg.min_bracket:
                o_max += cfg.min_bracket
        else:  # ratio < cfg.r_occ_min
            o_max = o
            if o_max - o_min < cfg.min_bracket:
                o_min -= cfg.min_bracket
    return last
