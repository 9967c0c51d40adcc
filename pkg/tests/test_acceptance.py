"""Acceptance suite: one test per criterion, each printing a single
`criterion N: PASS/FAIL` line (run with -s or check captured output)."""

import statistics
import time

import numpy as np
import pytest

from demforge import (AugmentProfile, ElevationGrid, GridGeometry,
                      InpaintConfig, SamplerConfig, TerrainSpec, VantagePoint,
                      augment_pair, cast, cast_oracle, gen_boxes, inpaint,
                      mask_from_grid, sample_occlusion)
from demforge import metrics as M
from demforge.cli import main as cli_main
from demforge.dataset import (DatasetManifest, TilingSpec, occlusion_filter,
                              stitch, tile_and_downsample)
from demforge.terrain import generate

from conftest import make_grid


def verdict(n, ok):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {n} failed"


def random_small_grid(rng):
    rows = int(rng.integers(4, 17))
    cols = int(rng.integers(4, 17))
    kind = ("hills", "stairs", "boxes", "noise")[int(rng.integers(0, 4))]
    geom = GridGeometry(rows, cols)
    if kind == "noise":
        return ElevationGrid(geom, rng.uniform(0, 0.5, geom.shape).astype(np.float32))
    return generate(TerrainSpec(kind=kind, geometry=geom,
                                seed=int(rng.integers(1 << 31))))


def random_vantage(rng, grid):
    geom = grid.geometry
    hx = geom.rows / 2.0 * geom.resolution_x
    hy = geom.cols / 2.0 * geom.resolution_y
    x = float(rng.uniform(-hx, hx - geom.resolution_x))
    y = float(rng.uniform(-hy, hy - geom.resolution_y))
    z = float(np.nanmax(grid.cells)) * rng.uniform(0.0, 1.2) + rng.uniform(0.05, 1.0)
    return VantagePoint(x, y, z)


def test_criterion_1_raycast_oracle_equivalence():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        g = random_small_grid(rng)
        vp = random_vantage(rng, g)
        a = cast(g, vp).occlusion.bits
        b = cast_oracle(g, vp, step_divisor=20).bits
        if not (a == b).all():
            mismatches += 1
    elapsed = time.perf_counter() - t0
    verdict(1, mismatches == 0 and elapsed < 30.0)


def test_criterion_2_visibility_monotonicity():
    rng = np.random.default_rng(1002)
    violations = 0
    for _ in range(100):
        g = random_small_grid(rng)
        geom = g.geometry
        hx = geom.rows / 2.0 * geom.resolution_x
        hy = geom.cols / 2.0 * geom.resolution_y
        x = float(rng.uniform(-hx, hx - geom.resolution_x))
        y = float(rng.uniform(-hy, hy - geom.resolution_y))
        base = float(np.nanmax(g.cells))
        low = cast(g, VantagePoint(x, y, base + 0.2)).occlusion.bits.astype(bool)
        high = cast(g, VantagePoint(x, y, base + 1.0)).occlusion.bits.astype(bool)
        if (high & ~low).any():
            violations += 1
    verdict(2, violations == 0)


@pytest.mark.slow
def test_criterion_3_occlusion_sampler_statistics():
    cfg = SamplerConfig()
    successes = 0
    ok = True
    for seed in range(1000):
        g = gen_boxes(TerrainSpec(kind="boxes", seed=seed))
        out = sample_occlusion(g, cfg, seed=seed)
        if out.iterations_used > cfg.max_iters:
            ok = False
        if out.success:
            successes += 1
            if not (cfg.r_occ_min <= out.achieved_ratio <= cfg.r_occ_max):
                ok = False
    ok = ok and successes >= 900
    # a plane cannot self-occlude from an elevated vantage: all seeds must fail
    flat = make_grid(np.zeros((64, 64)))
    flat_failures = sum(
        0 if sample_occlusion(flat, cfg, seed=s).success else 1 for s in range(20))
    verdict(3, ok and flat_failures == 20)


def test_criterion_4_metric_oracles():
    from test_metrics import naive_ssim
    rng = np.random.default_rng(1004)
    ok = True
    g = make_grid(rng.uniform(0, 1, (64, 64)).astype(np.float32))
    ok &= abs(M.ssim(g, g, 1.0) - 1.0) <= 1e-9
    ok &= M.psnr_occ(4.0, 2.0) == 0.0
    ok &= abs(M.psnr_occ(0.04, 2.0) - 20.0) < 1e-12
    for _ in range(50):
        a_cells = rng.uniform(0, 1, (64, 64)).astype(np.float32)
        b_cells = (a_cells + rng.normal(0, 0.15, (64, 64))).astype(np.float32)
        a = make_grid(a_cells)
        b = make_grid(b_cells)
        if abs(M.ssim(a, b, 1.0) - naive_ssim(a_cells, b_cells, 1.0)) > 1e-6:
            ok = False
            break
    verdict(4, bool(ok))


@pytest.mark.slow
def test_criterion_5_augmentation_statistics():
    ok = True
    # stage 6: occlusion fraction over 1e6 cells
    p6 = AugmentProfile(enable_scale=False, enable_offset=False,
                        enable_white=False, enable_range_noise=False,
                        enable_cluster=False, enable_occlusion=True)
    gt = make_grid(np.zeros((1000, 1000)))
    occ = make_grid(np.zeros((1000, 1000)))
    _, b = augment_pair(gt, occ, (0, 0), p6, seed=60001)
    frac = float(np.isnan(b.cells).mean())
    ok &= abs(frac - 0.02) <= 3.0 * np.sqrt(0.02 * 0.98 / 1e6)

    # stage 3: white-noise std over 1e6 cells
    p3 = AugmentProfile(enable_scale=False, enable_offset=False,
                        enable_white=True, enable_range_noise=False,
                        enable_cluster=False, enable_occlusion=False)
    a, _ = augment_pair(gt, occ, (0, 0), p3, seed=60003)
    std = float(a.cells.astype(np.float64).std())
    ok &= abs(std - 0.001) <= 0.001 * 0.05

    # stage 1: scale-factor mean over 1e5 draws
    p1 = AugmentProfile(enable_scale=True, enable_offset=False,
                        enable_white=False, enable_range_noise=False,
                        enable_cluster=False, enable_occlusion=False)
    one = make_grid(np.ones((1, 1)))
    n = 100_000
    factors = np.empty(n)
    for s in range(n):
        out, _ = augment_pair(one, one, (0, 0), p1, seed=s)
        factors[s] = out.cells[0, 0]
    sigma = (10.0 - 0.8) / np.sqrt(12.0)
    ok &= abs(float(factors.mean()) - 5.4) <= 3.0 * sigma / np.sqrt(n)
    verdict(5, bool(ok))


@pytest.mark.slow
def test_criterion_6_baseline_band_and_runtime(tmp_path):
    # part 1: diffusion PSNR over a regenerated 2,500-sample hills test split
    from demforge.dataset import build_synthetic_split
    manifest = build_synthetic_split(tmp_path / "hills-test", "hills", 2500,
                                     seed=606, split="test", threads=4)
    gts = [manifest.load_grid(r, "gt") for r in manifest.records]
    L = M.dynamic_range(gts).L
    cfg = InpaintConfig(method="diffusion")
    psnrs = []
    for rec, gt in zip(manifest.records, gts):
        occ = manifest.load_grid(rec, "occ")
        mask = mask_from_grid(occ)
        if not mask.bits.any():
            continue
        rec_grid = inpaint(occ, cfg)
        _, mse = M.occluded_errors(gt, rec_grid, mask)
        psnrs.append(M.psnr_occ(mse, L))
    mean_psnr = statistics.fmean(psnrs)
    in_band = 25.0 <= mean_psnr <= 35.0

    # part 2: full 300x300 -> 16x(75->64) -> inpaint -> stitch at >= 10 Hz
    geometry = GridGeometry(300, 300)
    from demforge.terrain import sample_scene
    terrain, vp = sample_scene(TerrainSpec(kind="hills", geometry=geometry, seed=606))
    occluded = cast(terrain, vp).occluded_grid
    tiling = TilingSpec(4, 75, 64)
    times = []
    for _ in range(10):
        t0 = time.perf_counter()
        tiles = tile_and_downsample(occluded, tiling)
        kept = occlusion_filter(tiles, 0.85)
        kept_ids = {id(t) for t in kept}
        filled = [inpaint(t, cfg) if id(t) in kept_ids else t for t in tiles]
        stitch(filled, 4)
        times.append(time.perf_counter() - t0)
    hz = 1.0 / statistics.fmean(times)
    print(f"criterion 6 detail: mean PSNR_occ={mean_psnr:.2f} dB "
          f"(n={len(psnrs)}), full-map rate={hz:.1f} Hz")
    verdict(6, in_band and hz >= 10.0)


def test_criterion_7_tiling_losslessness():
    rng = np.random.default_rng(1007)
    ok = True
    for side, tiles in ((300, 4), (600, 8)):
        cells = rng.uniform(-1, 1, (side, side)).astype(np.float32)
        cells[rng.random((side, side)) < 0.1] = np.nan
        g = make_grid(cells)
        parts = tile_and_downsample(g, TilingSpec(tiles, 75, 75))
        ok &= len(parts) == tiles * tiles
        back = stitch(parts, tiles)
        ok &= back.cells.tobytes() == g.cells.tobytes()
    verdict(7, bool(ok))


def test_criterion_8_cli_determinism(tmp_path):
    def tree(root):
        return {str(p.relative_to(root)): p.read_bytes()
                for p in sorted(root.rglob("*")) if p.is_file()}

    ok = True
    trees = []
    for name, threads in (("a", "1"), ("b", "4"), ("c", "2")):
        out = tmp_path / name
        code = cli_main(["synth", "--terrain", "boxes", "--count", "12",
                         "--seed", "88", "--threads", threads,
                         "--out", str(out / "src")])
        ok &= code == 0
        code = cli_main(["selfsup", "--in", str(out / "src" / "manifest.jsonl"),
                         "--seed", "99", "--threads", threads,
                         "--out", str(out / "ss")])
        ok &= code == 0
        trees.append(tree(out))
    ok &= trees[0] == trees[1] == trees[2]
    verdict(8, bool(ok))
