"""Dataset construction: synthetic splits, tiling/downsampling, occlusion and
keyframe filters, self-supervised pair generation, JSON-Lines manifests.

Every sample is generated from a per-record seed derived from the split seed,
so regeneration is bit-identical regardless of worker count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from . import metrics
from .augment import AugmentProfile, augment_pair
from .grid import ElevationGrid, GridGeometry, mask_from_grid, read_grid, write_grid
from .raycast import cast
from .sampler import SamplerConfig, sample_occlusion
from .terrain import TerrainSpec, sample_scene

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")
DEFAULT_SPLIT_SIZES = {"train": 25_000, "val": 2_500, "test": 2_500}


@dataclass
class DatasetManifest:
    split: str
    records: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    root: Optional[Path] = None  # directory paths in records are relative to

    def write(self, path) -> None:
        path = Path(path)
        ids = [r["id"] for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest record ids must be unique")
        header = {
            "schema_version": self.schema_version,
            "split": self.split,
            "count": len(self.records),
            "config": self.config,
        }
        with open(path, "w") as f:
            f.write(json.dumps(header) + "\n")
            for rec in self.records:
                f.write(json.dumps(rec) + "\n")

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        path = Path(path)
        with open(path) as f:
            lines = [ln for ln in f.read().splitlines() if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty manifest")
        header = json.loads(lines[0])
        if header.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported manifest schema {header.get('schema_version')}")
        records = [json.loads(ln) for ln in lines[1:]]
        if header.get("count") != len(records):
            raise ValueError(f"{path}: header count {header.get('count')} != {len(records)} records")
        return cls(split=header["split"], records=records, config=header.get("config", {}),
                   schema_version=header["schema_version"], root=path.parent)

    def grid_path(self, record: dict, role: str) -> Path:
        return (self.root or Path(".")) / record["grids"][role]

    def load_grid(self, record: dict, role: str) -> ElevationGrid:
        return read_grid(self.grid_path(record, role))


def _per_record_seeds(seed: int, n: int, stream: int = 0) -> np.ndarray:
    rng = np.random.default_rng([seed, stream])
    return rng.integers(0, 2**62, size=n, dtype=np.int64)


def build_synthetic_split(out_dir, kind: str, n_samples: int, seed: int,
                          split: str = "train",
                          geometry: Optional[GridGeometry] = None,
                          augment_profile: Optional[AugmentProfile] = None,
                          threads: int = 1) -> DatasetManifest:
    """Generate n terrain/occlusion pairs and write grids plus a manifest."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    geometry = geometry or GridGeometry(64, 64)
    out_dir = Path(out_dir)
    grids_dir = out_dir / "grids"
    grids_dir.mkdir(parents=True, exist_ok=True)

    terrain_seeds = _per_record_seeds(seed, n_samples, stream=0)
    augment_seeds = _per_record_seeds(seed, n_samples, stream=1)
    width = max(6, len(str(n_samples - 1)))

    def make(i: int) -> dict:
        sid = f"{kind}-{split}-{i:0{width}d}"
        tseed = int(terrain_seeds[i])
        spec = TerrainSpec(kind=kind, geometry=geometry, seed=tseed)
        gt, vp = sample_scene(spec)
        occ = cast(gt, vp).occluded_grid
        aseed = None
        if augment_profile is not None:
            aseed = int(augment_seeds[i])
            gt, occ = augment_pair(gt, occ, (vp.x, vp.y), augment_profile, aseed)
        gt_rel = f"grids/{sid}_gt.dgm"
        occ_rel = f"grids/{sid}_occ.dgm"
        write_grid(gt, out_dir / gt_rel)
        write_grid(occ, out_dir / occ_rel)
        return {
            "id": sid,
            "seed": tseed,
            "grids": {"gt": gt_rel, "occ": occ_rel},
            "provenance": {
                "terrain": kind,
                "vantage": [vp.x, vp.y, vp.z],
                "augment_seed": aseed,
                "augment_profile": augment_profile.to_dict() if augment_profile else None,
            },
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(make, range(n_samples)))
    else:
        records = [make(i) for i in range(n_samples)]

    manifest = DatasetManifest(
        split=split,
        records=records,
        config={
            "kind": kind,
            "n_samples": n_samples,
            "seed": seed,
            "geometry": [geometry.rows, geometry.cols,
                         geometry.resolution_x, geometry.resolution_y],
            "augment_profile": augment_profile.to_dict() if augment_profile else None,
        },
        root=out_dir,
    )
    manifest.write(out_dir / "manifest.jsonl")
    return manifest


@dataclass(frozen=True)
class TilingSpec:
    tiles_per_side: int
    tile_px: int
    out_px: int

    def __post_init__(self):
        if self.out_px > self.tile_px:
            raise ValueError("out_px must be <= tile_px")
        if self.tiles_per_side < 1 or self.tile_px < 1 or self.out_px < 1:
            raise ValueError("tiling parameters must be >= 1")


def _nearest_indices(src: int, dst: int) -> np.ndarray:
    return np.minimum((np.floor((np.arange(dst) + 0.5) * src / dst)).astype(int), src - 1)


def tile_and_downsample(g: ElevationGrid, spec: TilingSpec) -> list[ElevationGrid]:
    """Non-overlapping row-major tiles, nearest-neighbor downsampled."""
    geom = g.geometry
    side = spec.tiles_per_side * spec.tile_px
    if geom.rows != side or geom.cols != side:
        raise ValueError(f"grid {geom.rows}x{geom.cols} is not {spec.tiles_per_side}x"
                         f"{spec.tiles_per_side} tiles of {spec.tile_px} px")
    scale = spec.tile_px / spec.out_px
    sub_geom = GridGeometry(spec.out_px, spec.out_px,
                            geom.resolution_x * scale, geom.resolution_y * scale)
    sel = _nearest_indices(spec.tile_px, spec.out_px)
    tiles = []
    for ti in range(spec.tiles_per_side):
        for tj in range(spec.tiles_per_side):
            block = g.cells[ti * spec.tile_px:(ti + 1) * spec.tile_px,
                            tj * spec.tile_px:(tj + 1) * spec.tile_px]
            tiles.append(ElevationGrid(sub_geom, block[np.ix_(sel, sel)].copy()))
    return tiles


def stitch(tiles: list[ElevationGrid], tiles_per_side: int) -> ElevationGrid:
    """Inverse of tile_and_downsample when out_px == tile_px."""
    if len(tiles) != tiles_per_side ** 2:
        raise ValueError(f"expected {tiles_per_side ** 2} tiles, got {len(tiles)}")
    px = tiles[0].geometry.rows
    side = tiles_per_side * px
    cells = np.empty((side, side), dtype=np.float32)
    for ti in range(tiles_per_side):
        for tj in range(tiles_per_side):
            t = tiles[ti * tiles_per_side + tj]
            cells[ti * px:(ti + 1) * px, tj * px:(tj + 1) * px] = t.cells
    geom = GridGeometry(side, side, tiles[0].geometry.resolution_x,
                        tiles[0].geometry.resolution_y)
    return ElevationGrid(geom, cells)


def occlusion_filter(tiles: Iterable[ElevationGrid],
                     max_ratio: float) -> list[ElevationGrid]:
    """Drop tiles whose missing-cell ratio exceeds max_ratio."""
    return [t for t in tiles if t.missing_ratio() <= max_ratio]


def keyframe_filter(grids: Iterable[ElevationGrid],
                    threshold_db: float = 50.0) -> Iterator[ElevationGrid]:
    """Accept a frame only if it differs enough (PSNR below threshold) from the
    last accepted frame; L is the running elevation range of the stream."""
    last: Optional[ElevationGrid] = None
    lo = math.inf
    hi = -math.inf
    for g in grids:
        valid = ~g.missing
        if valid.any():
            lo = min(lo, float(g.cells[valid].min()))
            hi = max(hi, float(g.cells[valid].max()))
        if last is None:
            last = g
            yield g
            continue
        both = valid & ~last.missing
        if not both.any():
            last = g
            yield g
            continue
        diff = g.cells[both].astype(np.float64) - last.cells[both].astype(np.float64)
        mse = float((diff ** 2).mean())
        if mse == 0.0:
            psnr = math.inf
        elif hi - lo <= 0.0:
            psnr = -math.inf
        else:
            psnr = metrics.psnr_occ(mse, hi - lo)
        if psnr < threshold_db:
            last = g
            yield g


def build_selfsup_split(source: DatasetManifest, cfg: SamplerConfig, seed: int,
                        out_dir, threads: int = 1) -> tuple[DatasetManifest, int]:
    """Add artificial occlusion to every source grid; returns (manifest, failures)."""
    out_dir = Path(out_dir)
    grids_dir = out_dir / "grids"
    grids_dir.mkdir(parents=True, exist_ok=True)
    seeds = _per_record_seeds(seed, len(source.records), stream=2)

    def make(item) -> Optional[dict]:
        i, rec = item
        # prefer the complete terrain grid; fall back to whatever the source has
        for role in ("gt", "target", "occ", "input"):
            if role in rec["grids"]:
                break
        target = source.load_grid(rec, role)
        outcome = sample_occlusion(target, cfg, int(seeds[i]))
        if not outcome.success:
            return None
        sid = rec["id"] + "-ss"
        target_rel = f"grids/{sid}_target.dgm"
        input_rel = f"grids/{sid}_input.dgm"
        mask_rel = f"grids/{sid}_amask.dgm"
        write_grid(target, out_dir / target_rel)
        write_grid(outcome.input_grid, out_dir / input_rel)
        write_grid(ElevationGrid(target.geometry,
                                 outcome.mask.bits.astype(np.float32)),
                   out_dir / mask_rel)
        return {
            "id": sid,
            "seed": int(seeds[i]),
            "grids": {"target": target_rel, "input": input_rel, "amask": mask_rel},
            "provenance": {
                "source_id": rec["id"],
                "achieved_ratio": outcome.achieved_ratio,
                "iterations": outcome.iterations_used,
                "vantage": [outcome.vantage.x, outcome.vantage.y, outcome.vantage.z],
            },
        }

    items = list(enumerate(source.records))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(make, items))
    else:
        results = [make(it) for it in items]

    records = [r for r in results if r is not None]
    failures = len(results) - len(records)
    if not records:
        raise RuntimeError(f"all {failures} samples failed occlusion sampling")
    manifest = DatasetManifest(
        split=source.split,
        records=records,
        config={
            "source_manifest": (os.path.relpath(source.root / "manifest.jsonl", out_dir)
                                if source.root else None),
            "sampler": {
                "r_occ_min": cfg.r_occ_min, "r_occ_max": cfg.r_occ_max,
                "o_min_init": cfg.o_min_init, "o_max_init": cfg.o_max_init,
                "min_bracket": cfg.min_bracket, "max_iters": cfg.max_iters,
            },
            "seed": seed,
            "failures": failures,
        },
        root=out_dir,
    )
    manifest.write(out_dir / "manifest.jsonl")
    return manifest, failures


def resolve_threads(requested: Optional[int]) -> int:
    if requested is not None and requested > 0:
        return requested
    env = os.environ.get("DEMFORGE_THREADS")
    if env:
        try:
            val = int(env)
            if val > 0:
                return val
        except ValueError:
            pass
    return 1
