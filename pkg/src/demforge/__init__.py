"""demforge: occluded elevation-map datasets, classical inpainting baselines
and evaluation metrics for terrain reconstruction."""

from .augment import AugmentProfile, augment_pair
from .dataset import (DatasetManifest, TilingSpec, build_selfsup_split,
                      build_synthetic_split, keyframe_filter, occlusion_filter,
                      stitch, tile_and_downsample)
from .grid import (ElevationGrid, GeometryMismatchError, GridFormatError,
                   GridGeometry, NormalizationState, OcclusionMask, compose,
                   denormalize, mask_from_grid, normalize, read_grid, write_grid)
from .inpaint import InpaintConfig, inpaint
from .metrics import (DynamicRange, MetricsReport, dynamic_range,
                      occluded_errors, psnr_occ, ssim)
from .raycast import (MissingAnchorError, RayCastResult, VantagePoint, cast,
                      cast_oracle, vantage_from_grid)
from .sampler import SamplerConfig, SamplerOutcome, sample_occlusion
from .terrain import TerrainSpec, gen_boxes, gen_hills, gen_stairs, sample_scene

__version__ = "0.1.0"

__all__ = [
    "AugmentProfile", "augment_pair",
    "DatasetManifest", "TilingSpec", "build_selfsup_split",
    "build_synthetic_split", "keyframe_filter", "occlusion_filter",
    "stitch", "tile_and_downsample",
    "ElevationGrid", "GridGeometry", "OcclusionMask", "NormalizationState",
    "GridFormatError", "GeometryMismatchError",
    "compose", "denormalize", "mask_from_grid", "normalize",
    "read_grid", "write_grid",
    "InpaintConfig", "inpaint",
    "DynamicRange", "MetricsReport", "dynamic_range", "occluded_errors",
    "psnr_occ", "ssim",
    "MissingAnchorError", "RayCastResult", "VantagePoint",
    "cast", "cast_oracle", "vantage_from_grid",
    "SamplerConfig", "SamplerOutcome", "sample_occlusion",
    "TerrainSpec", "gen_boxes", "gen_hills", "gen_stairs", "sample_scene",
]
