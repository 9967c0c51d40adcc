"""Six-stage Syn2Real augmentation applied to (ground-truth, occluded) pairs.

Stages, in fixed order: vertical scale, vertical offset, white noise,
range-adjusted noise, cluster noise, random occlusion. Noise draws are shared
between both grids so the pair keeps describing the same surface; random
occlusion applies to the occluded grid only.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .grid import ElevationGrid, GeometryMismatchError
from .terrain import _cell_centers


@dataclass(frozen=True)
class AugmentProfile:
    enable_scale: bool = True
    scale_range: tuple[float, float] = (0.8, 10.0)
    enable_offset: bool = True
    offset_range: tuple[float, float] = (-1.0, 1.0)
    enable_white: bool = True
    white_sigma: float = 0.001            # std, meters
    enable_range_noise: bool = True
    range_noise_factor: float = 0.01      # std at the normalization distance
    range_norm: float = 10.0              # meters
    enable_cluster: bool = True
    cluster_prob: float = 0.05
    cluster_sigma_elev: float = 0.03      # std of cluster center amplitude
    cluster_blur_sigma: float = 1.0       # px
    enable_occlusion: bool = True
    random_occl_prob: float = 0.02

    def __post_init__(self):
        for p in (self.cluster_prob, self.random_occl_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probabilities must be in [0, 1], got {p}")
        for s in (self.white_sigma, self.range_noise_factor,
                  self.cluster_sigma_elev, self.cluster_blur_sigma):
            if s < 0:
                raise ValueError(f"sigmas must be >= 0, got {s}")
        if self.scale_range[0] > self.scale_range[1]:
            raise ValueError(f"bad scale_range {self.scale_range}")

    @classmethod
    def disabled(cls) -> "AugmentProfile":
        return cls(enable_scale=False, enable_offset=False, enable_white=False,
                   enable_range_noise=False, enable_cluster=False,
                   enable_occlusion=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scale_range"] = list(self.scale_range)
        d["offset_range"] = list(self.offset_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentProfile":
        d = dict(d)
        for key in ("scale_range", "offset_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "AugmentProfile":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def augment_pair(gt: ElevationGrid, occ: ElevationGrid, robot_xy,
                 profile: AugmentProfile, seed: int
                 ) -> tuple[ElevationGrid, ElevationGrid]:
    if gt.geometry != occ.geometry:
        raise GeometryMismatchError(f"{gt.geometry} != {occ.geometry}")
    rng = np.random.default_rng(seed)
    geom = gt.geometry
    a = gt.cells.astype(np.float64)
    b = occ.cells.astype(np.float64)

    # 1. shared vertical scale
    if profile.enable_scale:
        f = rng.uniform(*profile.scale_range)
        a *= f
        b *= f

    # 2. shared vertical offset
    if profile.enable_offset:
        off = rng.uniform(*profile.offset_range)
        a += off
        b += off

    # 3. per-cell white noise, shared between the pair
    if profile.enable_white:
        w = rng.normal(0.0, profile.white_sigma, size=geom.shape)
        a += w
        b += w

    # 4. range-adjusted noise: std grows quadratically with planar distance
    if profile.enable_range_noise:
        xg, yg = _cell_centers(geom)
        d = np.hypot(xg - robot_xy[0], yg - robot_xy[1])
        sigma = profile.range_noise_factor * (d / profile.range_norm) ** 2
        w = rng.normal(0.0, 1.0, size=geom.shape) * sigma
        a += w
        b += w

    # 5. cluster noise: sparse centers blurred with a Gaussian before addition
    if profile.enable_cluster:
        centers = rng.random(geom.shape) < profile.cluster_prob
        amplitudes = rng.normal(0.0, profile.cluster_sigma_elev, size=geom.shape)
        field = np.where(centers, amplitudes, 0.0)
        w = gaussian_filter(field, sigma=profile.cluster_blur_sigma,
                            mode="constant", truncate=3.0)
        a += w
        b += w

    # 6. random occlusion of the occluded grid only
    if profile.enable_occlusion:
        drop = rng.random(geom.shape) < profile.random_occl_prob
        b[drop] = np.nan

    # NaN cells absorb the arithmetic above and stay missing
    return (ElevationGrid(geom, a.astype(np.float32)),
            ElevationGrid(geom, b.astype(np.float32)))
